// kge: train shallow knowledge-graph embedding models on triple TSVs, rank
// link predictions, calibrate statement probabilities, and compute
// embedding+link-prediction drug similarity reports.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kge/analytics.hpp"
#include "kge/evaluation.hpp"
#include "kge/inference.hpp"
#include "kge/model.hpp"
#include "kge/similarity.hpp"
#include "kge/training.hpp"
#include "kge/triple_store.hpp"

namespace {

using namespace kge;

void echo(const std::string& line) { std::cerr << "[kge] " << line << '\n'; }

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
}

std::vector<int> parse_levels(const std::string& csv) {
    std::vector<int> levels;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) levels.push_back(std::stoi(item));
    if (levels.empty()) throw std::runtime_error("no hits levels given");
    return levels;
}

struct SplitArgs {
    std::string in, out_train, out_test, out_valid;
    double test_frac = 0.2;
    double valid_frac = 0.0;
    uint64_t seed = 42;
};

int run_split(const SplitArgs& args) {
    echo("split in=" + args.in + " test_frac=" + std::to_string(args.test_frac) +
         " valid_frac=" + std::to_string(args.valid_frac) + " seed=" + std::to_string(args.seed));
    auto store = ingest_tsv(args.in);
    if (store.duplicates_dropped > 0)
        echo("dropped " + std::to_string(store.duplicates_dropped) + " duplicate triples");

    auto main_split = split(store, args.test_frac, args.seed);
    echo("test fraction achieved: " + std::to_string(main_split.achieved_test_fraction) +
         " (reassigned " + std::to_string(main_split.reassigned_to_train) + ")");

    if (args.valid_frac > 0.0) {
        if (args.out_valid.empty())
            throw std::runtime_error("--valid-frac requires --out-valid");
        // fraction of the remaining train portion that yields the requested
        // share of the original store
        const double inner = args.valid_frac / (1.0 - args.test_frac);
        auto valid_split = split(main_split.train, inner, args.seed + 1);
        export_tsv(valid_split.train, args.out_train);
        export_tsv(valid_split.test, args.out_valid);
    } else {
        export_tsv(main_split.train, args.out_train);
    }
    export_tsv(main_split.test, args.out_test);
    echo("wrote " + args.out_train + " (" + std::to_string(main_split.train.size()) +
         ") and " + args.out_test + " (" + std::to_string(main_split.test.size()) + ")");
    return 0;
}

struct TrainArgs {
    std::string train_path, config_path, checkpoint;
    std::optional<std::string> model, loss, optimizer, reg;
    std::optional<int> dim, negatives, epochs, batch;
    std::optional<double> lr, reg_lambda;
    std::optional<uint64_t> seed;
    bool quiet_epochs = false;
};

TrainConfig resolve_train_config(const TrainArgs& args) {
    TrainConfig cfg;
    if (!args.config_path.empty()) cfg = parse_config_file(args.config_path, cfg);
    if (args.model) cfg.kind = parse_model_kind(*args.model);
    if (args.dim) cfg.dim = *args.dim;
    if (args.loss) cfg.loss = parse_loss_kind(*args.loss);
    if (args.optimizer) cfg.optimizer = parse_optimizer_kind(*args.optimizer);
    if (args.lr) cfg.lr = *args.lr;
    if (args.reg) cfg.reg = parse_reg_kind(*args.reg);
    if (args.reg_lambda) cfg.reg_lambda = *args.reg_lambda;
    if (args.negatives) cfg.negatives = *args.negatives;
    if (args.epochs) cfg.epochs = *args.epochs;
    if (args.batch) cfg.batch = *args.batch;
    if (args.seed) cfg.seed = *args.seed;
    return cfg;
}

int run_train(const TrainArgs& args) {
    const TrainConfig cfg = resolve_train_config(args);
    echo("train " + config_to_string(cfg));

    auto store = ingest_tsv(args.train_path);
    if (store.duplicates_dropped > 0)
        echo("dropped " + std::to_string(store.duplicates_dropped) + " duplicate triples");
    echo("triples=" + std::to_string(store.size()) + " entities=" +
         std::to_string(store.n_entities()) + " relations=" + std::to_string(store.n_relations()));

    auto [params, report] = train(store, cfg);
    if (!args.quiet_epochs) {
        for (std::size_t e = 0; e < report.epoch_loss.size(); ++e)
            echo("epoch " + std::to_string(e + 1) + " loss " +
                 std::to_string(report.epoch_loss[e]));
    }
    echo("trained in " + std::to_string(report.wall_seconds) + "s");

    save_checkpoint(params, *store.entities, *store.relations, args.checkpoint);
    echo("checkpoint written to " + args.checkpoint);
    return 0;
}

struct GridArgs {
    std::string train_path, test_path, grid_path, metric = "mrr", out;
};

int run_grid(const GridArgs& args) {
    echo("grid train=" + args.train_path + " test=" + args.test_path + " grid=" + args.grid_path +
         " metric=" + args.metric);
    auto train_store = ingest_tsv(args.train_path);
    auto test_store = encode_tsv(args.test_path, train_store.entities, train_store.relations);
    auto grid = parse_grid_file(args.grid_path);
    const Metric metric = parse_metric(args.metric);
    for (const auto& cfg : grid) echo("cell: " + config_to_string(cfg));

    auto results = grid_search(train_store, grid, metric, test_store);

    std::ostringstream csv;
    csv << "rank," << metric_name(metric) << ",mrr,hits@1,hits@3,hits@10,status,config\n";
    for (std::size_t i = 0; i < results.size(); ++i) {
        const GridResult& row = results[i];
        csv << (i + 1) << ',';
        if (row.failed) {
            csv << ",,,,,failed: " << csv_field(row.error);
        } else {
            char buf[128];
            std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f,%.6f,ok", row.metric_value,
                          row.mrr, row.hits1, row.hits3, row.hits10);
            csv << buf;
        }
        csv << ',' << csv_field(config_to_string(row.config)) << '\n';
    }
    if (args.out.empty()) {
        std::cout << csv.str();
    } else {
        open_output(args.out) << csv.str();
        echo("wrote " + args.out);
    }
    return 0;
}

struct EvalArgs {
    std::string checkpoint, test_path, train_path, valid_path, hits = "1,3,10";
    std::string csv_out, per_triple_out;
    int threads = 1;
};

int run_eval(const EvalArgs& args) {
    echo("eval checkpoint=" + args.checkpoint + " test=" + args.test_path +
         " hits=" + args.hits + " threads=" + std::to_string(args.threads));
    auto ckpt = load_checkpoint(args.checkpoint);
    auto test = encode_tsv(args.test_path, ckpt.entities, ckpt.relations);

    std::vector<TripleStore> stores;
    stores.push_back(test);
    if (!args.train_path.empty())
        stores.push_back(encode_tsv(args.train_path, ckpt.entities, ckpt.relations));
    if (!args.valid_path.empty())
        stores.push_back(encode_tsv(args.valid_path, ckpt.entities, ckpt.relations));
    std::vector<const TripleStore*> pointers;
    for (const auto& s : stores) pointers.push_back(&s);
    auto filter = FilterIndex::build(std::span<const TripleStore* const>(pointers));

    const auto levels = parse_levels(args.hits);
    auto raw = evaluate(ckpt.params, test, nullptr, Protocol::Raw, levels, args.threads);
    auto filtered = evaluate(ckpt.params, test, &filter, Protocol::Filtered, levels, args.threads);

    const RankReport reports[] = {raw, filtered};
    std::cout << format_report_table(std::span<const RankReport>(reports, 2));
    if (!args.csv_out.empty()) {
        auto out = open_output(args.csv_out);
        write_report_csv(out, std::span<const RankReport>(reports, 2));
        echo("wrote " + args.csv_out);
    }
    if (!args.per_triple_out.empty()) {
        auto out = open_output(args.per_triple_out);
        write_per_triple_csv(out, filtered, *ckpt.entities, *ckpt.relations);
        echo("wrote " + args.per_triple_out);
    }
    return 0;
}

struct AssessArgs {
    std::string checkpoint, statements_path, protocol = "filtered", out;
    std::vector<std::string> filter_paths;
};

int run_assess(const AssessArgs& args) {
    echo("assess checkpoint=" + args.checkpoint + " statements=" + args.statements_path +
         " protocol=" + args.protocol);
    auto ckpt = load_checkpoint(args.checkpoint);
    const Protocol protocol = parse_protocol(args.protocol);

    std::vector<TripleStore> stores;
    for (const auto& path : args.filter_paths)
        stores.push_back(encode_tsv(path, ckpt.entities, ckpt.relations));
    std::optional<FilterIndex> filter;
    if (!stores.empty()) {
        std::vector<const TripleStore*> pointers;
        for (const auto& s : stores) pointers.push_back(&s);
        filter = FilterIndex::build(std::span<const TripleStore* const>(pointers));
    }
    if (protocol == Protocol::Filtered && !filter)
        throw std::runtime_error("filtered protocol needs --filter-tsv (or use --protocol raw)");

    auto statements = load_statements_tsv(args.statements_path);
    auto rows = batch_assess(ckpt.params, *ckpt.entities, *ckpt.relations, statements,
                             filter ? &*filter : nullptr, protocol);
    std::size_t failed = 0;
    for (const auto& row : rows)
        if (!row.result) ++failed;
    if (failed > 0) echo(std::to_string(failed) + " statements failed to resolve");

    if (args.out.empty()) {
        write_assessments_csv(std::cout, rows);
    } else {
        auto out = open_output(args.out);
        write_assessments_csv(out, rows);
        echo("wrote " + args.out);
    }
    return 0;
}

struct SimilarArgs {
    std::string checkpoint, query, out;
    std::size_t k = 10;
    std::string relations_csv, candidates_path, types_path, candidates_type, entities_type;
    std::string names_path, fingerprints_path;
    bool both_sides = false;
    int threads = 1;
};

int run_similar(const SimilarArgs& args) {
    echo("similar checkpoint=" + args.checkpoint + " query=" + args.query +
         " k=" + std::to_string(args.k) + " both_sides=" + (args.both_sides ? "yes" : "no") +
         " threads=" + std::to_string(args.threads));
    auto ckpt = load_checkpoint(args.checkpoint);
    const int32_t query = ckpt.entities->at(args.query);

    std::vector<std::string> types;
    if (!args.types_path.empty()) types = load_entity_types(args.types_path, *ckpt.entities);
    if (types.empty() && (!args.candidates_type.empty() || !args.entities_type.empty()))
        throw std::runtime_error("type filters need --types");

    std::vector<int32_t> relations;
    if (args.relations_csv.empty()) {
        for (int32_t r = 0; r < ckpt.params.n_relations; ++r) relations.push_back(r);
    } else {
        std::stringstream ss(args.relations_csv);
        std::string label;
        while (std::getline(ss, label, ',')) relations.push_back(ckpt.relations->at(label));
    }

    std::vector<int32_t> candidates;
    if (!args.candidates_path.empty()) {
        std::ifstream in(args.candidates_path);
        if (!in) throw std::runtime_error("cannot open " + args.candidates_path);
        std::string label;
        while (std::getline(in, label)) {
            if (!label.empty() && label.back() == '\r') label.pop_back();
            if (label.empty() || label[0] == '#') continue;
            const int32_t id = ckpt.entities->at(label);
            if (id != query) candidates.push_back(id);
        }
    } else {
        for (int32_t e = 0; e < ckpt.params.n_entities; ++e) {
            if (e == query) continue;
            if (!args.candidates_type.empty() && types[e] != args.candidates_type) continue;
            candidates.push_back(e);
        }
    }

    std::vector<int32_t> entities;
    for (int32_t e = 0; e < ckpt.params.n_entities; ++e) {
        if (!args.entities_type.empty() && types[e] != args.entities_type) continue;
        entities.push_back(e);
    }
    echo("candidates=" + std::to_string(candidates.size()) +
         " profile_entities=" + std::to_string(entities.size()) +
         " relations=" + std::to_string(relations.size()));

    auto rows = top_k_similar(ckpt.params, query, candidates, args.k, relations, entities,
                              args.both_sides ? ProfileSide::BothSides : ProfileSide::TailOnly,
                              args.threads);

    std::unordered_map<std::string, std::string> names;
    if (!args.names_path.empty()) names = load_display_names(args.names_path);
    std::unordered_map<std::string, Fingerprint> fingerprints;
    if (!args.fingerprints_path.empty())
        fingerprints = load_fingerprints_tsv(args.fingerprints_path);

    if (args.out.empty()) {
        write_similarity_csv(std::cout, rows, *ckpt.entities, names, fingerprints, args.query);
    } else {
        auto out = open_output(args.out);
        write_similarity_csv(out, rows, *ckpt.entities, names, fingerprints, args.query);
        echo("wrote " + args.out);
    }
    return 0;
}

struct ProjectArgs {
    std::string checkpoint, out, types_path;
};

int run_project(const ProjectArgs& args) {
    echo("project checkpoint=" + args.checkpoint);
    auto ckpt = load_checkpoint(args.checkpoint);
    auto proj = pca_2d(ckpt.params.entity, static_cast<std::size_t>(ckpt.params.n_entities),
                       static_cast<std::size_t>(ckpt.params.width));
    echo("explained variance: " + std::to_string(proj.explained_variance[0]) + ", " +
         std::to_string(proj.explained_variance[1]));

    std::vector<std::string> types;
    if (!args.types_path.empty()) types = load_entity_types(args.types_path, *ckpt.entities);

    if (args.out.empty()) {
        export_projection(proj, *ckpt.entities, types, std::cout);
    } else {
        auto out = open_output(args.out);
        export_projection(proj, *ckpt.entities, types, out);
        echo("wrote " + args.out);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"knowledge graph embedding toolkit"};
    app.require_subcommand(1);

    SplitArgs split_args;
    auto* cmd_split = app.add_subcommand("split", "split a triple TSV into train/test");
    cmd_split->add_option("--in", split_args.in, "input triple TSV")->required();
    cmd_split->add_option("--test-frac", split_args.test_frac, "test fraction in (0,1)");
    cmd_split->add_option("--valid-frac", split_args.valid_frac,
                          "optional validation fraction of the whole set");
    cmd_split->add_option("--seed", split_args.seed, "rng seed");
    cmd_split->add_option("--out-train", split_args.out_train, "train TSV path")->required();
    cmd_split->add_option("--out-test", split_args.out_test, "test TSV path")->required();
    cmd_split->add_option("--out-valid", split_args.out_valid, "validation TSV path");

    TrainArgs train_args;
    auto* cmd_train = app.add_subcommand("train", "train a model and write a checkpoint");
    cmd_train->add_option("--train", train_args.train_path, "train triple TSV")->required();
    cmd_train->add_option("--config", train_args.config_path, "key=value config file");
    cmd_train->add_option("--checkpoint", train_args.checkpoint, "output checkpoint")->required();
    cmd_train->add_option("--model", train_args.model,
                          "transe_l1|transe_l2|distmult|complex|hole");
    cmd_train->add_option("--dim", train_args.dim, "embedding dimension");
    cmd_train->add_option("--loss", train_args.loss, "nll|bce");
    cmd_train->add_option("--optimizer", train_args.optimizer, "adam|sgd");
    cmd_train->add_option("--lr", train_args.lr, "learning rate");
    cmd_train->add_option("--reg", train_args.reg, "none|l1|l2|l3");
    cmd_train->add_option("--reg-lambda", train_args.reg_lambda, "regularization constant");
    cmd_train->add_option("--negatives", train_args.negatives, "negatives per positive");
    cmd_train->add_option("--epochs", train_args.epochs, "training epochs");
    cmd_train->add_option("--batch", train_args.batch, "batch size");
    cmd_train->add_option("--seed", train_args.seed, "rng seed");
    cmd_train->add_flag("--quiet-epochs", train_args.quiet_epochs, "suppress per-epoch lines");

    GridArgs grid_args;
    auto* cmd_grid = app.add_subcommand("grid", "hyperparameter grid search");
    cmd_grid->add_option("--train", grid_args.train_path, "train triple TSV")->required();
    cmd_grid->add_option("--test", grid_args.test_path, "test triple TSV")->required();
    cmd_grid->add_option("--grid", grid_args.grid_path, "grid file, one config per line")
        ->required();
    cmd_grid->add_option("--metric", grid_args.metric, "mrr or hits@N");
    cmd_grid->add_option("--out", grid_args.out, "results CSV (stdout when omitted)");

    EvalArgs eval_args;
    auto* cmd_eval = app.add_subcommand("eval", "rank test triples, raw and filtered");
    cmd_eval->add_option("--checkpoint", eval_args.checkpoint, "model checkpoint")->required();
    cmd_eval->add_option("--test", eval_args.test_path, "test triple TSV")->required();
    cmd_eval->add_option("--train", eval_args.train_path, "train TSV for the filter");
    cmd_eval->add_option("--valid", eval_args.valid_path, "validation TSV for the filter");
    cmd_eval->add_option("--hits", eval_args.hits, "comma-separated hits levels");
    cmd_eval->add_option("--csv", eval_args.csv_out, "aggregate CSV path");
    cmd_eval->add_option("--per-triple", eval_args.per_triple_out, "per-triple rank CSV path");
    cmd_eval->add_option("--threads", eval_args.threads, "worker threads for ranking");

    AssessArgs assess_args;
    auto* cmd_assess = app.add_subcommand("assess", "score statements with rank and probability");
    cmd_assess->add_option("--checkpoint", assess_args.checkpoint, "model checkpoint")
        ->required();
    cmd_assess->add_option("--statements", assess_args.statements_path, "statement TSV")
        ->required();
    cmd_assess->add_option("--filter-tsv", assess_args.filter_paths,
                           "known-triple TSVs for the filtered protocol (repeatable)");
    cmd_assess->add_option("--protocol", assess_args.protocol, "raw|filtered");
    cmd_assess->add_option("--out", assess_args.out, "output CSV (stdout when omitted)");

    SimilarArgs similar_args;
    auto* cmd_similar = app.add_subcommand("similar", "top-k similar drugs for a query entity");
    cmd_similar->add_option("--checkpoint", similar_args.checkpoint, "model checkpoint")
        ->required();
    cmd_similar->add_option("--query", similar_args.query, "query entity label")->required();
    cmd_similar->add_option("--k", similar_args.k, "rows to report");
    cmd_similar->add_option("--relations", similar_args.relations_csv,
                            "comma-separated relation labels (default: all)");
    cmd_similar->add_option("--candidates", similar_args.candidates_path,
                            "candidate labels, one per line (default: all entities)");
    cmd_similar->add_option("--types", similar_args.types_path, "entity type TSV");
    cmd_similar->add_option("--candidates-type", similar_args.candidates_type,
                            "restrict candidates to one type");
    cmd_similar->add_option("--entities-type", similar_args.entities_type,
                            "restrict profile entities to one type");
    cmd_similar->add_option("--names", similar_args.names_path, "display-name TSV");
    cmd_similar->add_option("--fingerprints", similar_args.fingerprints_path,
                            "hex fingerprint TSV for the tanimoto column");
    cmd_similar->add_flag("--both-sides", similar_args.both_sides,
                          "average head- and tail-side probabilities in profiles");
    cmd_similar->add_option("--out", similar_args.out, "output CSV (stdout when omitted)");
    cmd_similar->add_option("--threads", similar_args.threads, "worker threads over candidates");

    ProjectArgs project_args;
    auto* cmd_project = app.add_subcommand("project", "export 2D PCA of entity embeddings");
    cmd_project->add_option("--checkpoint", project_args.checkpoint, "model checkpoint")
        ->required();
    cmd_project->add_option("--out", project_args.out, "output CSV (stdout when omitted)");
    cmd_project->add_option("--types", project_args.types_path, "entity type TSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (cmd_split->parsed()) return run_split(split_args);
        if (cmd_train->parsed()) return run_train(train_args);
        if (cmd_grid->parsed()) return run_grid(grid_args);
        if (cmd_eval->parsed()) return run_eval(eval_args);
        if (cmd_assess->parsed()) return run_assess(assess_args);
        if (cmd_similar->parsed()) return run_similar(similar_args);
        if (cmd_project->parsed()) return run_project(project_args);
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
