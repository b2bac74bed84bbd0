// hashnet command-line front end. Exit codes: 0 success, 1 usage error,
// 2 validation/data error, 3 numeric divergence.

#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "hashnet/checkpoint.hpp"
#include "hashnet/cost.hpp"
#include "hashnet/dataset.hpp"
#include "hashnet/retrieval.hpp"
#include "hashnet/trainer.hpp"

namespace {

using namespace hashnet;

struct Options {
    std::string config;
    std::string preset;
    std::string manifest;
    std::string checkpoint;
    std::string out;
    std::string codes;     // positional code file
    std::string query_id;  // positional query id
    std::string ap_norm = "min_rk";
    std::uint64_t seed = 1;
    double lr = 0.01;
    std::size_t batch = 32;
    std::size_t max_iters = 30000;
    std::size_t k = 0;  // per-command default applied after parsing
    std::size_t bits = 0;
    std::size_t classes = 0;
    std::size_t per_class = 0;
    std::size_t size = 0;
};

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error("write to '" + path + "' failed");
}

NetworkConfig pick_config(const Options& opt) {
    if (!opt.preset.empty()) {
        if (!opt.config.empty()) {
            throw Error("--config and --preset are mutually exclusive");
        }
        if (!is_builtin_config(opt.preset)) {
            throw Error("unknown preset '" + opt.preset + "'");
        }
        return builtin_config(opt.preset);
    }
    if (opt.config.empty()) throw Error("one of --config or --preset is required");
    return resolve_config(opt.config);
}

int run_train(const Options& opt, bool max_iters_given) {
    NetworkConfig config = pick_config(opt);
    if (opt.bits != 0) config = with_hash_bits(config, opt.bits);

    TrainConfig tc;
    tc.initial_lr = opt.lr;
    tc.batch_size = opt.batch;
    tc.max_iterations = opt.max_iters;
    tc.seed = opt.seed;
    // The toy preset is a desk-scale run; default to 2,000 iterations
    // unless the user asked for a specific count.
    if (opt.preset == "toy" && !max_iters_given) tc.max_iterations = 2000;

    const DatasetManifest manifest = load_manifest(opt.manifest);
    const Dataset data = load_dataset(manifest, config.input.height, config.input.width);

    Network net = build(config, opt.seed);
    const TrainLog log = train(net, data, tc);
    save_checkpoint(net, opt.out);
    write_text_file(opt.out + ".log", log.to_text());

    std::cout << "trained " << tc.max_iterations << " iterations on " << data.items.size()
              << " images (" << config.name << ")\n";
    if (!log.entries.empty()) {
        std::cout << "final mean loss " << log.entries.back().mean_loss << "\n";
    }
    std::cout << "checkpoint " << opt.out << "\n";
    std::cout << "training log " << opt.out << ".log\n";
    return 0;
}

int run_encode(const Options& opt) {
    const Network net = load_checkpoint(opt.checkpoint);
    const DatasetManifest manifest = load_manifest(opt.manifest);
    const Dataset data =
        load_dataset(manifest, net.config().input.height, net.config().input.width);
    const CodeBook book = encode_dataset(net, data);
    save_codes_file(book, opt.out);
    std::cout << "encoded " << book.codes.size() << " images at " << book.bits << " bits to "
              << opt.out << "\n";
    return 0;
}

int run_index_query(const Options& opt) {
    const CodeBook book = load_codes_file(opt.codes);
    const BinaryCode* q = nullptr;
    for (const BinaryCode& c : book.codes) {
        if (c.image_id == opt.query_id) {
            q = &c;
            break;
        }
    }
    if (q == nullptr) {
        throw Error("query id '" + opt.query_id + "' not found in '" + opt.codes + "'");
    }
    const RetrievalResult result = query(book, *q, opt.k);
    std::cout << result_to_text(result, book);
    return 0;
}

int run_eval(const Options& opt) {
    const CodeBook book = load_codes_file(opt.codes);
    const EvalReport report = evaluate_map(book, opt.k, parse_ap_norm(opt.ap_norm));
    std::cout << report.to_keyvalues();
    if (!opt.out.empty()) write_text_file(opt.out, report.per_query_csv());
    return 0;
}

int run_cost_report(const Options& opt) {
    const NetworkConfig config = pick_config(opt);
    const CostReport report = cost_report(config);
    std::cout << cost_table(report);
    if (!opt.out.empty()) write_text_file(opt.out, cost_keyvalues(report));
    return 0;
}

int run_gen_synth(const Options& opt) {
    const Dataset data = generate_synthetic(opt.classes, opt.per_class, opt.size, opt.seed);
    write_dataset(data, opt.out);
    std::cout << "wrote " << data.items.size() << " images (" << opt.classes << " classes) to "
              << opt.out << "\n";
    return 0;
}

int run_inspect(const Options& opt) {
    const Network net = load_checkpoint(opt.checkpoint);
    const CostReport report = cost_report(net.config());
    std::cout << "checkpoint " << opt.checkpoint << "\n";
    std::cout << "training step " << net.step << "\n";
    std::cout << "hash bits " << net.hash_bits() << "\n";
    std::cout << "classes " << net.num_classes() << "\n";
    std::cout << "parameters " << report.total_params << "\n";
    std::cout << "multi-adds " << report.total_multiadds << "\n";
    std::cout << "config:\n" << config_to_text(net.config());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hashnet: depthwise-separable hashing network pipeline"};
    app.require_subcommand(1);

    Options opt;

    CLI::App* train_cmd =
        app.add_subcommand("train", "Train a network on a manifest and write a checkpoint");
    train_cmd->add_option("--config", opt.config, "built-in config name or config file path");
    train_cmd->add_option("--preset", opt.preset, "desk-scale preset (toy)");
    train_cmd->add_option("--manifest", opt.manifest, "dataset manifest CSV")->required();
    train_cmd->add_option("--out", opt.out, "output checkpoint path")->required();
    train_cmd->add_option("--seed", opt.seed, "initialization and shuffling seed");
    train_cmd->add_option("--lr", opt.lr, "initial learning rate");
    train_cmd->add_option("--batch", opt.batch, "mini-batch size");
    CLI::Option* max_iters_opt =
        train_cmd->add_option("--max-iters", opt.max_iters, "total SGD iterations");
    train_cmd->add_option("--bits", opt.bits, "override the hash code width K");

    CLI::App* encode_cmd =
        app.add_subcommand("encode", "Binarize latent activations of every manifest image");
    encode_cmd->add_option("--checkpoint", opt.checkpoint, "trained checkpoint")->required();
    encode_cmd->add_option("--manifest", opt.manifest, "dataset manifest CSV")->required();
    encode_cmd->add_option("--out", opt.out, "output code file")->required();

    CLI::App* query_cmd =
        app.add_subcommand("index-query", "Rank a code file against one of its entries");
    query_cmd->add_option("codes", opt.codes, "code file")->required();
    query_cmd->add_option("query_id", opt.query_id, "image id of the query")->required();
    CLI::Option* query_k = query_cmd->add_option("--k", opt.k, "list length (default 10)");

    CLI::App* eval_cmd =
        app.add_subcommand("eval", "Leave-one-out MAP evaluation of a code file");
    eval_cmd->add_option("codes", opt.codes, "code file")->required();
    CLI::Option* eval_k = eval_cmd->add_option("--k", opt.k, "retrieval depth (default 100)");
    eval_cmd->add_option("--ap-norm", opt.ap_norm, "AP normalization: min_rk, k or r");
    eval_cmd->add_option("--out", opt.out, "write per-query CSV here");

    CLI::App* cost_cmd =
        app.add_subcommand("cost-report", "Parameter and multiply-add accounting for a config");
    cost_cmd->add_option("--config", opt.config, "built-in config name or config file path");
    cost_cmd->add_option("--preset", opt.preset, "desk-scale preset (toy)");
    cost_cmd->add_option("--out", opt.out, "write machine-readable key-values here");

    CLI::App* synth_cmd =
        app.add_subcommand("gen-synth", "Generate a synthetic labeled PPM dataset");
    synth_cmd->add_option("classes", opt.classes, "number of classes")->required();
    synth_cmd->add_option("per_class", opt.per_class, "images per class")->required();
    synth_cmd->add_option("size", opt.size, "square image extent in pixels")->required();
    synth_cmd->add_option("--out", opt.out, "output directory")->required();
    synth_cmd->add_option("--seed", opt.seed, "generator seed");

    CLI::App* inspect_cmd =
        app.add_subcommand("inspect-checkpoint", "Describe a checkpoint file");
    inspect_cmd->add_option("--checkpoint", opt.checkpoint, "checkpoint path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints help, exit 0
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (train_cmd->parsed()) return run_train(opt, max_iters_opt->count() > 0);
        if (encode_cmd->parsed()) return run_encode(opt);
        if (query_cmd->parsed()) {
            if (query_k->count() == 0) opt.k = 10;
            return run_index_query(opt);
        }
        if (eval_cmd->parsed()) {
            if (eval_k->count() == 0) opt.k = 100;
            return run_eval(opt);
        }
        if (cost_cmd->parsed()) return run_cost_report(opt);
        if (synth_cmd->parsed()) return run_gen_synth(opt);
        if (inspect_cmd->parsed()) return run_inspect(opt);
        std::cerr << "error: no subcommand\n";
        return 1;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
