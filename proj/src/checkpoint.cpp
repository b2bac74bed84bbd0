#include "hashnet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace hashnet {

namespace {

constexpr char kMagic[8] = {'H', 'N', 'E', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint64_t kVersion = 1;

} // namespace

void save_checkpoint(const Network& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");

    out.write(kMagic, sizeof kMagic);
    write_u64_le(out, kVersion);
    write_u64_le(out, net.step);

    const std::string config_text = config_to_text(net.config());
    write_u64_le(out, config_text.size());
    out.write(config_text.data(), static_cast<std::streamsize>(config_text.size()));

    std::uint64_t tensor_count = 0;
    for (std::size_t i = 0; i < net.layer_count(); ++i) {
        tensor_count += net.layer(i).state_tensors().size();
    }
    write_u64_le(out, tensor_count);
    for (std::size_t i = 0; i < net.layer_count(); ++i) {
        for (const Tensor* t : net.layer(i).state_tensors()) {
            write_tensor(out, *t);
        }
    }
    if (!out) throw Error("write to '" + path + "' failed");
}

Network load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint '" + path + "'");

    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) {
        throw Error("'" + path + "' is not a checkpoint file (bad magic)");
    }
    const std::uint64_t version = read_u64_le(in);
    if (version != kVersion) {
        throw Error("checkpoint '" + path + "' has unsupported format version " +
                    std::to_string(version));
    }
    const std::uint64_t step = read_u64_le(in);

    const std::uint64_t text_len = read_u64_le(in);
    if (text_len > (std::uint64_t{1} << 20)) {
        throw Error("checkpoint '" + path + "': config text length is implausible");
    }
    std::string config_text(text_len, '\0');
    in.read(config_text.data(), static_cast<std::streamsize>(text_len));
    if (!in) throw Error("checkpoint '" + path + "' is truncated (config text)");

    NetworkConfig config = parse_config_text(config_text, path + " (embedded config)");
    Network net(config, shape_chain(config));
    net.step = step;

    std::uint64_t expected = 0;
    for (std::size_t i = 0; i < net.layer_count(); ++i) {
        expected += net.layer(i).state_tensors().size();
    }
    const std::uint64_t tensor_count = read_u64_le(in);
    if (tensor_count != expected) {
        throw Error("checkpoint '" + path + "' holds " + std::to_string(tensor_count) +
                    " tensors, config requires " + std::to_string(expected));
    }

    for (std::size_t i = 0; i < net.layer_count(); ++i) {
        for (Tensor* slot : net.layer(i).state_tensors()) {
            Tensor loaded = [&] {
                try {
                    return read_tensor(in);
                } catch (const Error& e) {
                    throw Error("checkpoint '" + path + "', layer " + std::to_string(i + 1) +
                                " (" + net.layer(i).describe() + "): " + e.what());
                }
            }();
            if (loaded.shape() != slot->shape()) {
                std::ostringstream os;
                os << "checkpoint '" << path << "', layer " << (i + 1) << " ("
                   << net.layer(i).describe() << "): tensor shape mismatch";
                throw Error(os.str());
            }
            *slot = std::move(loaded);
        }
    }
    return net;
}

} // namespace hashnet
