#include "cli.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <set>

#include <fmt/format.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "relrec/checkpoint.hpp"
#include "relrec/errors.hpp"
#include "relrec/eval.hpp"
#include "relrec/training.hpp"

namespace relrec::cli {

namespace {

using nlohmann::ordered_json;

class LogScope {
public:
    LogScope(std::ostream& err) : previous_(spdlog::default_logger()) {
        auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
        auto logger = std::make_shared<spdlog::logger>("relrec", sink);
        logger->set_pattern("[%l] %v");
        logger->set_level(spdlog::level::info);
        if (const char* env = std::getenv("RELREC_LOG")) {
            const std::string v = env;
            if (v == "error") logger->set_level(spdlog::level::err);
            else if (v == "warn") logger->set_level(spdlog::level::warn);
            else if (v == "debug") logger->set_level(spdlog::level::debug);
            else if (v != "info") logger->warn("ignoring RELREC_LOG={}; expected error, warn, info or debug", v);
        }
        spdlog::set_default_logger(logger);
    }
    ~LogScope() { spdlog::set_default_logger(previous_); }

private:
    std::shared_ptr<spdlog::logger> previous_;
};

EntityId lookup_term(const Vocab& vocab, const std::string& term) {
    if (auto id = vocab.find(term)) return *id;
    std::string msg = "unknown term '" + term + "'";
    const auto near = vocab.nearest(term, 5);
    if (!near.empty()) {
        msg += "; nearest vocabulary terms:";
        for (const auto& n : near) msg += " '" + n + "'";
    }
    throw DataError(msg);
}

std::vector<LabeledPair> for_relation(const std::vector<LabeledPair>& pairs, RelationId r) {
    std::vector<LabeledPair> out;
    for (const auto& p : pairs)
        if (p.relation == r) out.push_back(p);
    return out;
}

void write_pairs_file(const std::vector<LabeledPair>& pairs, const Vocab& vocab,
                      const RelationSchema& schema, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path);
    write_pairs(pairs, vocab, schema, f);
}

void add_train_options(CLI::App& cmd, TrainConfig& c, std::string& mode) {
    cmd.add_option("--d", c.d, "embedding dimension")->capture_default_str();
    cmd.add_option("--d_p", c.d_p, "assumption representation size (0: same as d)");
    cmd.add_option("--d_a", c.d_a, "attention hidden size (0: same as d_p)");
    cmd.add_option("--b1", c.b1, "entities per recall step")->capture_default_str();
    cmd.add_option("--b2", c.b2, "triples per relational step")->capture_default_str();
    cmd.add_option("--b3", c.b3, "pairs per prediction step")->capture_default_str();
    cmd.add_option("--n_neg", c.n_neg, "corruptions per triple side")->capture_default_str();
    cmd.add_option("--n_c", c.n_c, "associations per entity")->capture_default_str();
    cmd.add_option("--n_h", c.n_h, "head associations (0: n_c)");
    cmd.add_option("--n_t", c.n_t, "tail associations (0: n_c)");
    cmd.add_option("--lr", c.lr, "Adam learning rate")->capture_default_str();
    cmd.add_option("--beta1", c.beta1)->capture_default_str();
    cmd.add_option("--beta2", c.beta2)->capture_default_str();
    cmd.add_option("--eps", c.eps)->capture_default_str();
    cmd.add_option("--patience", c.patience, "epochs without dev F1 gain")->capture_default_str();
    cmd.add_option("--max_epochs", c.max_epochs)->capture_default_str();
    cmd.add_option("--threshold", c.threshold, "decision threshold")->capture_default_str();
    cmd.add_option("--na_in_denominator", c.na_in_denominator)->capture_default_str();
    cmd.add_option("--recall_stage", c.recall_stage)->capture_default_str();
    cmd.add_option("--relational_stage", c.relational_stage)->capture_default_str();
    cmd.add_option("--prediction_stage", c.prediction_stage)->capture_default_str();
    cmd.add_option("--mode", mode, "assumption mode used during training")
        ->check(CLI::IsMember({"owa", "cwa"}, CLI::ignore_case))
        ->capture_default_str();
}

// ---- train ------------------------------------------------------------------------------

struct TrainArgs {
    std::string graph, triples, pairs, out, relation, dev_pairs, test_pairs;
    std::string mode = "owa";
    TrainConfig config;
};

int cmd_train(TrainArgs& a, std::ostream& out) {
    TrainConfig config = a.config;
    config.mode = parse_assumption_mode(a.mode);
    config.validate();

    const CoocGraph graph = load_cooc_graph(a.graph);
    RelationSchema schema;
    const TripleSet triples = load_triples(a.triples, graph.vocab, schema);
    auto pairs = load_pairs(a.pairs, graph.vocab, schema);
    std::vector<LabeledPair> dev, test;
    if (!a.dev_pairs.empty()) dev = load_pairs(a.dev_pairs, graph.vocab, schema);
    if (!a.test_pairs.empty()) test = load_pairs(a.test_pairs, graph.vocab, schema);

    RelationId target;
    if (!a.relation.empty()) {
        auto r = schema.find(a.relation);
        if (!r) throw DataError("relation '" + a.relation + "' does not occur in the inputs");
        target = *r;
    } else {
        std::set<RelationId> seen;
        for (const auto& p : pairs) seen.insert(p.relation);
        if (seen.size() != 1)
            throw DataError("the pairs file holds " + std::to_string(seen.size()) +
                            " relations; choose one with --relation");
        target = *seen.begin();
    }
    pairs = for_relation(pairs, target);
    if (pairs.empty()) throw DataError("no labelled pairs for relation " + schema.names()[target]);

    std::vector<LabeledPair> train;
    if (a.dev_pairs.empty()) {
        auto split = split_dataset(pairs, {0.70, 0.15, 0.15}, config.seed);
        train = std::move(split.train);
        dev = std::move(split.dev);
        if (a.test_pairs.empty()) test = std::move(split.test);
        write_pairs_file(train, graph.vocab, schema, a.out + ".train.tsv");
        write_pairs_file(dev, graph.vocab, schema, a.out + ".dev.tsv");
        write_pairs_file(test, graph.vocab, schema, a.out + ".test.tsv");
    } else {
        train = std::move(pairs);
        dev = for_relation(dev, target);
    }
    test = for_relation(test, target);

    const PpmiMatrix ppmi = compute_ppmi(graph);
    TrainingData data{&graph, &ppmi, without_pairs(triples, test), train, dev, schema.size()};
    spdlog::info("training on {} pairs ({} dev, {} test), {} triples, {} entities", train.size(),
                 dev.size(), test.size(), data.triples.size(), graph.vocab.size());
    TrainResult result = joint_train(data, config);

    Checkpoint ck;
    ck.dims = config.dims(schema.size());
    ck.params = std::move(result.params);
    ck.adam = std::move(result.adam);
    ck.vocab = graph.vocab;
    ck.schema = schema;
    ck.target = target;
    ck.config = config;
    ck.kb = without_pairs(data.triples, dev);
    ck.best_epoch = result.best_epoch;
    ck.best_dev_f1 = result.best_dev_f1;
    save_checkpoint(ck, a.out);

    const std::string log_path = a.out + ".log.csv";
    {
        std::ofstream f(log_path);
        if (!f) throw DataError("cannot write " + log_path);
        write_training_log(result.log, f);
    }

    ordered_json summary{{"checkpoint", a.out},
                         {"log", log_path},
                         {"relation", schema.names()[target]},
                         {"epochs", result.log.size()},
                         {"best_epoch", result.best_epoch},
                         {"best_dev_f1", result.best_dev_f1},
                         {"stopped_early", result.stopped_early}};
    if (!test.empty()) {
        const auto probs = predict_pairs(ck.params, test, config.predict_options(&ck.kb));
        std::vector<int> labels;
        for (const auto& p : test) labels.push_back(p.label);
        const auto m = f1_score(probs, labels, config.threshold);
        summary["test"] = {{"n", test.size()}, {"precision", m.precision}, {"recall", m.recall},
                           {"f1", m.f1}};
    }
    out << summary.dump() << '\n';
    return kOk;
}

// ---- predict ----------------------------------------------------------------------------

struct PredictArgs {
    std::string model, pairs, head, tail, mode;
    unsigned threads = 1;
};

PredictOptions options_for(const Checkpoint& ck, const std::string& mode) {
    TrainConfig c = ck.config;
    if (!mode.empty()) c.mode = parse_assumption_mode(mode);
    return c.predict_options(&ck.kb);
}

int cmd_predict(const PredictArgs& a, std::ostream& out) {
    const Checkpoint ck = load_checkpoint(a.model);
    const auto opts = options_for(ck, a.mode);
    std::vector<LabeledPair> pairs;
    bool gold = false;
    if (!a.pairs.empty()) {
        RelationSchema schema = ck.schema;
        pairs = for_relation(load_pairs(a.pairs, ck.vocab, schema), ck.target);
        gold = true;
    } else {
        if (a.head.empty() || a.tail.empty())
            throw CLI::ValidationError("predict needs --pairs or both --head and --tail");
        pairs.push_back({lookup_term(ck.vocab, a.head), lookup_term(ck.vocab, a.tail), 0, ck.target});
    }
    const auto probs = predict_pairs(ck.params, pairs, opts, a.threads);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        ordered_json j{{"head", ck.vocab.term(pairs[i].head)},
                       {"tail", ck.vocab.term(pairs[i].tail)},
                       {"relation", ck.schema.names()[ck.target]},
                       {"mode", to_string(opts.mode)},
                       {"probability", probs[i]},
                       {"predicted", probs[i] >= ck.config.threshold ? 1 : 0}};
        if (gold) j["label"] = pairs[i].label;
        out << j.dump() << '\n';
    }
    return kOk;
}

// ---- rationalize ------------------------------------------------------------------------

struct RationalizeArgs {
    std::string model, head, tail, mode;
    std::size_t topk = 5;
    bool json_only = false;
};

int cmd_rationalize(const RationalizeArgs& a, std::ostream& out) {
    const Checkpoint ck = load_checkpoint(a.model);
    const auto opts = options_for(ck, a.mode);
    const EntityId h = lookup_term(ck.vocab, a.head);
    const EntityId t = lookup_term(ck.vocab, a.tail);
    const Prediction pred = predict_relation(ck.params, h, t, opts);
    const auto report = extract_rationales(pred, {h, ck.target, t}, a.topk);
    out << report_to_json(report, ck.vocab, ck.schema) << '\n';
    if (!a.json_only) out << format_report_table(report, ck.vocab, ck.schema);
    return kOk;
}

// ---- evaluate ---------------------------------------------------------------------------

struct EvaluateArgs {
    std::vector<std::string> models;
    std::string pairs, dump;
    std::string mode = "owa";
    unsigned threads = 1;
    bool json_only = false;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
    std::vector<AssumptionMode> modes;
    if (a.mode == "both") modes = {AssumptionMode::owa, AssumptionMode::cwa};
    else modes = {parse_assumption_mode(a.mode)};

    std::ofstream dump;
    if (!a.dump.empty()) {
        dump.open(a.dump);
        if (!dump) throw DataError("cannot write " + a.dump);
        dump << "model\tmode\thead\ttail\tlabel\tprobability\n";
    }

    std::vector<ResultCell> cells;
    for (const auto& path : a.models) {
        const Checkpoint ck = load_checkpoint(path);
        RelationSchema schema = ck.schema;
        const auto pairs = for_relation(load_pairs(a.pairs, ck.vocab, schema), ck.target);
        const std::string& relation = ck.schema.names()[ck.target];
        if (pairs.empty())
            throw DataError(a.pairs + " holds no pairs for relation " + relation + " of " + path);
        std::vector<int> labels;
        for (const auto& p : pairs) labels.push_back(p.label);

        for (AssumptionMode mode : modes) {
            TrainConfig c = ck.config;
            c.mode = mode;
            const auto probs = predict_pairs(ck.params, pairs, c.predict_options(&ck.kb), a.threads);
            const auto m = f1_score(probs, labels, c.threshold);
            ordered_json j{{"model", path},      {"relation", relation},
                           {"mode", to_string(mode)}, {"n", pairs.size()},
                           {"precision", m.precision}, {"recall", m.recall},
                           {"f1", m.f1}};
            out << j.dump() << '\n';
            cells.push_back({mode == AssumptionMode::owa ? "Ours" : "Ours (w/ CWA)", relation, m.f1});
            if (dump)
                for (std::size_t i = 0; i < pairs.size(); ++i)
                    dump << path << '\t' << to_string(mode) << '\t' << ck.vocab.term(pairs[i].head)
                         << '\t' << ck.vocab.term(pairs[i].tail) << '\t' << labels[i] << '\t'
                         << fmt::format("{}", probs[i]) << '\n';
        }
    }
    if (!a.json_only) out << format_results_table(cells);
    return kOk;
}

// ---- synth ------------------------------------------------------------------------------

struct SynthArgs {
    std::string out;
    SyntheticSpec spec;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
    const auto world = generate_synthetic(a.spec);
    write_synthetic(world, a.out);
    ordered_json j{{"dir", a.out},
                   {"entities", world.graph.vocab.size()},
                   {"edges", world.graph.edges.size()},
                   {"triples", world.triples.size()},
                   {"pairs", world.pairs.size()},
                   {"target", world.schema.names()[world.target]},
                   {"seed", a.spec.seed}};
    out << j.dump() << '\n';
    return kOk;
}

}  // namespace

std::string format_results_table(const std::vector<ResultCell>& cells) {
    std::vector<std::string> methods, relations;
    std::map<std::pair<std::string, std::string>, std::vector<double>> values;
    for (const auto& c : cells) {
        if (std::find(methods.begin(), methods.end(), c.method) == methods.end())
            methods.push_back(c.method);
        if (std::find(relations.begin(), relations.end(), c.relation) == relations.end())
            relations.push_back(c.relation);
        values[{c.method, c.relation}].push_back(c.f1);
    }

    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header{"Methods"};
    header.insert(header.end(), relations.begin(), relations.end());
    header.push_back("Avg.");
    rows.push_back(header);
    for (const auto& m : methods) {
        std::vector<std::string> row{m};
        double sum = 0;
        std::size_t filled = 0;
        for (const auto& r : relations) {
            auto it = values.find({m, r});
            if (it == values.end()) {
                row.push_back("-");
                continue;
            }
            const auto& v = it->second;
            double mean = 0;
            for (double x : v) mean += x;
            mean /= static_cast<double>(v.size());
            double var = 0;
            for (double x : v) var += (x - mean) * (x - mean);
            const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
            row.push_back(fmt::format("{:.3f} (±{:.3f})", mean, sd));
            sum += mean;
            ++filled;
        }
        row.push_back(filled ? fmt::format("{:.3f}", sum / static_cast<double>(filled)) : "-");
        rows.push_back(std::move(row));
    }

    // Column widths count code points so the ± sign does not skew alignment.
    auto width = [](const std::string& s) {
        std::size_t n = 0;
        for (unsigned char c : s) n += (c & 0xC0) != 0x80;
        return n;
    };
    std::vector<std::size_t> widths(header.size(), 0);
    for (const auto& row : rows)
        for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], width(row[i]));

    std::string text;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t i = 0; i < rows[r].size(); ++i) {
            text += i ? "  " : "";
            text += rows[r][i] + std::string(widths[i] - width(rows[r][i]), ' ');
        }
        while (!text.empty() && text.back() == ' ') text.pop_back();
        text += '\n';
        if (r == 0) {
            std::size_t total = 0;
            for (auto w : widths) total += w;
            text += std::string(total + 2 * (widths.size() - 1), '-') + '\n';
        }
    }
    return text;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    LogScope log_scope(err);

    CLI::App app{"Cognitive-stage relation prediction with rationales"};
    app.name("relrec");
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML/INI file; one [section] per subcommand");
    app.allow_config_extras(CLI::config_extras_mode::error);

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "train a model and write its checkpoint");
    train_cmd->fallthrough();
    train_cmd->add_option("--graph", train.graph, "co-occurrence TSV (optionally gzipped)")->required();
    train_cmd->add_option("--triples", train.triples, "gold triple TSV")->required();
    train_cmd->add_option("--pairs", train.pairs, "labelled pair TSV")->required();
    train_cmd->add_option("--out", train.out, "checkpoint path")->required();
    train_cmd->add_option("--relation", train.relation, "target relation name");
    train_cmd->add_option("--dev-pairs", train.dev_pairs, "explicit dev pairs (skips the split)");
    train_cmd->add_option("--test-pairs", train.test_pairs, "explicit test pairs");
    train_cmd->add_option("--seed", train.config.seed)->capture_default_str();
    add_train_options(*train_cmd, train.config, train.mode);

    PredictArgs predict;
    auto* predict_cmd = app.add_subcommand("predict", "probabilities for labelled pairs or one pair");
    predict_cmd->fallthrough();
    predict_cmd->add_option("--model", predict.model, "checkpoint")->required();
    predict_cmd->add_option("--pairs", predict.pairs, "labelled pair TSV");
    predict_cmd->add_option("--head", predict.head);
    predict_cmd->add_option("--tail", predict.tail);
    predict_cmd->add_option("--mode", predict.mode)->check(CLI::IsMember({"owa", "cwa"}, CLI::ignore_case));
    predict_cmd->add_option("--threads", predict.threads)->check(CLI::PositiveNumber);

    RationalizeArgs rat;
    auto* rat_cmd = app.add_subcommand("rationalize", "top-K rationales for one pair");
    rat_cmd->fallthrough();
    rat_cmd->add_option("--model", rat.model, "checkpoint")->required();
    rat_cmd->add_option("--head", rat.head)->required();
    rat_cmd->add_option("--tail", rat.tail)->required();
    rat_cmd->add_option("--topk", rat.topk)->capture_default_str()->check(CLI::PositiveNumber);
    rat_cmd->add_option("--mode", rat.mode)->check(CLI::IsMember({"owa", "cwa"}, CLI::ignore_case));
    rat_cmd->add_flag("--json", rat.json_only, "JSON line only");

    EvaluateArgs ev;
    auto* ev_cmd = app.add_subcommand("evaluate", "metrics and a per-relation results table");
    ev_cmd->fallthrough();
    ev_cmd->add_option("--model", ev.models, "checkpoint; repeat for several runs or relations")->required();
    ev_cmd->add_option("--pairs", ev.pairs, "labelled test pairs")->required();
    ev_cmd->add_option("--mode", ev.mode)
        ->check(CLI::IsMember({"owa", "cwa", "both"}, CLI::ignore_case))
        ->capture_default_str();
    ev_cmd->add_option("--threads", ev.threads)->check(CLI::PositiveNumber);
    ev_cmd->add_option("--dump", ev.dump, "per-pair prediction TSV");
    ev_cmd->add_flag("--json", ev.json_only, "JSON lines only");

    SynthArgs syn;
    auto* syn_cmd = app.add_subcommand("synth", "write a planted-cluster dataset");
    syn_cmd->fallthrough();
    syn_cmd->add_option("--out", syn.out, "output directory")->required();
    syn_cmd->add_option("--seed", syn.spec.seed)->capture_default_str();
    syn_cmd->add_option("--entities", syn.spec.n_entities)->capture_default_str();
    syn_cmd->add_option("--clusters", syn.spec.n_clusters)->capture_default_str();
    syn_cmd->add_option("--relations", syn.spec.n_rel)->capture_default_str();
    syn_cmd->add_option("--density", syn.spec.density)->capture_default_str();
    syn_cmd->add_option("--cross_density", syn.spec.cross_density)->capture_default_str();
    syn_cmd->add_option("--noise", syn.spec.noise)->capture_default_str();
    syn_cmd->add_option("--triple_density", syn.spec.triple_density)->capture_default_str();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        for (auto* a : {&predict.mode, &rat.mode, &ev.mode, &train.mode})
            for (auto& ch : *a) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        if (*train_cmd) return cmd_train(train, out);
        if (*predict_cmd) return cmd_predict(predict, out);
        if (*rat_cmd) return cmd_rationalize(rat, out);
        if (*ev_cmd) return cmd_evaluate(ev, out);
        if (*syn_cmd) return cmd_synth(syn, out);
    } catch (const CLI::ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const DivergenceError& e) {
        err << "error: training diverged: " << e.what() << '\n';
        return kDivergence;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    }
    return kUsage;
}

}  // namespace relrec::cli
