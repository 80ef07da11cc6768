#include "relrec/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"
#include "relrec/errors.hpp"

namespace relrec {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written in host order, which must be little-endian");

namespace {

using nlohmann::json;

constexpr const char* kFormatTag = "relrec-checkpoint";

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

json config_to_json(const TrainConfig& c) {
    return json{{"d", c.d},
                {"d_p", c.d_p},
                {"d_a", c.d_a},
                {"b1", c.b1},
                {"b2", c.b2},
                {"b3", c.b3},
                {"n_neg", c.n_neg},
                {"n_c", c.n_c},
                {"n_h", c.n_h},
                {"n_t", c.n_t},
                {"top_k", c.top_k},
                {"lr", c.lr},
                {"beta1", c.beta1},
                {"beta2", c.beta2},
                {"eps", c.eps},
                {"patience", c.patience},
                {"max_epochs", c.max_epochs},
                {"seed", c.seed},
                {"threshold", c.threshold},
                {"na_in_denominator", c.na_in_denominator},
                {"mode", std::string(to_string(c.mode))},
                {"recall_stage", c.recall_stage},
                {"relational_stage", c.relational_stage},
                {"prediction_stage", c.prediction_stage}};
}

TrainConfig config_from_json(const json& j) {
    TrainConfig c;
    j.at("d").get_to(c.d);
    j.at("d_p").get_to(c.d_p);
    j.at("d_a").get_to(c.d_a);
    j.at("b1").get_to(c.b1);
    j.at("b2").get_to(c.b2);
    j.at("b3").get_to(c.b3);
    j.at("n_neg").get_to(c.n_neg);
    j.at("n_c").get_to(c.n_c);
    j.at("n_h").get_to(c.n_h);
    j.at("n_t").get_to(c.n_t);
    j.at("top_k").get_to(c.top_k);
    j.at("lr").get_to(c.lr);
    j.at("beta1").get_to(c.beta1);
    j.at("beta2").get_to(c.beta2);
    j.at("eps").get_to(c.eps);
    j.at("patience").get_to(c.patience);
    j.at("max_epochs").get_to(c.max_epochs);
    j.at("seed").get_to(c.seed);
    j.at("threshold").get_to(c.threshold);
    j.at("na_in_denominator").get_to(c.na_in_denominator);
    c.mode = parse_assumption_mode(j.at("mode").get<std::string>());
    j.at("recall_stage").get_to(c.recall_stage);
    j.at("relational_stage").get_to(c.relational_stage);
    j.at("prediction_stage").get_to(c.prediction_stage);
    return c;
}

void append_doubles(std::string& out, std::span<const Real> values) {
    for (Real v : values) {
        const auto bits = std::bit_cast<std::uint64_t>(static_cast<double>(v));
        char buf[8];
        std::memcpy(buf, &bits, 8);
        out.append(buf, 8);
    }
}

void read_doubles(std::string_view& in, std::span<Real> values) {
    if (in.size() < values.size() * 8) throw CheckpointError("checkpoint payload truncated");
    for (auto& v : values) {
        std::uint64_t bits = 0;
        std::memcpy(&bits, in.data(), 8);
        v = std::bit_cast<double>(bits);
        in.remove_prefix(8);
    }
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const auto& p = ckpt.params;
    json tensors = json::array();
    std::string payload;
    auto add_block = [&](const std::string& name, const Matrix& m) {
        tensors.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
        append_doubles(payload, m.flat());
    };
    for (std::size_t i = 0; i < kNumTensors; ++i) add_block(std::string(kTensorNames[i]), p.tensors[i]);
    json steps = json::array();
    for (std::size_t i = 0; i < kNumTensors; ++i) {
        const auto& mom = ckpt.adam.moments[i];
        add_block("adam_m/" + std::string(kTensorNames[i]), mom.m);
        add_block("adam_v/" + std::string(kTensorNames[i]), mom.v);
        steps.push_back(mom.step);
    }

    json kb = json::array();
    for (const auto& t : ckpt.kb.triples()) kb.push_back({t.head, t.relation, t.tail});

    json header{
        {"format", kFormatTag},
        {"version", kCheckpointVersion},
        {"dims", {{"d", ckpt.dims.d}, {"d_p", ckpt.dims.d_p}, {"d_a", ckpt.dims.d_a},
                  {"n_rel", ckpt.dims.n_rel}}},
        {"config", config_to_json(ckpt.config)},
        {"vocab", ckpt.vocab.terms()},
        {"vocab_hash", ckpt.vocab.hash()},
        {"relations", ckpt.schema.names()},
        {"target", ckpt.target},
        {"kb", std::move(kb)},
        {"best_epoch", ckpt.best_epoch},
        {"best_dev_f1", ckpt.best_dev_f1},
        {"adam", {{"lr", ckpt.adam.lr}, {"beta1", ckpt.adam.beta1}, {"beta2", ckpt.adam.beta2},
                  {"eps", ckpt.adam.eps}, {"steps", std::move(steps)}}},
        {"tensors", std::move(tensors)},
        {"payload_bytes", payload.size()},
        {"checksum", fnv1a(payload)},
    };

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
    out << header.dump() << '\n';
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw CheckpointError(path.string() + ": empty checkpoint");
    std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception& e) {
        throw CheckpointError(path.string() + ": corrupted header (" + e.what() + ")");
    }

    try {
        if (!header.is_object() || header.value("format", "") != kFormatTag)
            throw CheckpointError(path.string() + ": not a relrec checkpoint");
        const int version = header.at("version").get<int>();
        if (version != kCheckpointVersion)
            throw VersionError(path.string() + ": checkpoint version " + std::to_string(version) +
                               " is not supported (expected " +
                               std::to_string(kCheckpointVersion) + ")");
        if (payload.size() != header.at("payload_bytes").get<std::size_t>())
            throw CheckpointError(path.string() + ": payload size mismatch");
        if (fnv1a(payload) != header.at("checksum").get<std::uint64_t>())
            throw CheckpointError(path.string() + ": payload checksum mismatch");

        Checkpoint ck;
        const auto& dims = header.at("dims");
        ck.dims = {dims.at("d").get<std::size_t>(), dims.at("d_p").get<std::size_t>(),
                   dims.at("d_a").get<std::size_t>(), dims.at("n_rel").get<std::size_t>()};
        ck.dims.validate();
        ck.config = config_from_json(header.at("config"));
        ck.vocab = Vocab(header.at("vocab").get<std::vector<std::string>>());
        if (ck.vocab.hash() != header.at("vocab_hash").get<std::uint64_t>())
            throw CheckpointError(path.string() + ": vocabulary hash mismatch");
        ck.schema = RelationSchema(header.at("relations").get<std::vector<std::string>>());
        if (ck.schema.size() != ck.dims.n_rel)
            throw CheckpointError(path.string() + ": relation count does not match dims");
        ck.target = header.at("target").get<RelationId>();
        for (const auto& t : header.at("kb"))
            ck.kb.add({t.at(0).get<EntityId>(), t.at(1).get<RelationId>(), t.at(2).get<EntityId>()});
        ck.best_epoch = header.at("best_epoch").get<std::size_t>();
        ck.best_dev_f1 = header.at("best_dev_f1").get<double>();

        ck.params = ModelParams::zeros(ck.dims, ck.vocab.size());
        const auto& adam = header.at("adam");
        ck.adam = AdamState(ck.params, adam.at("lr").get<double>(), adam.at("beta1").get<double>(),
                            adam.at("beta2").get<double>(), adam.at("eps").get<double>());
        const auto& steps = adam.at("steps");

        const auto& table = header.at("tensors");
        if (table.size() != 3 * kNumTensors || steps.size() != kNumTensors)
            throw CheckpointError(path.string() + ": unexpected tensor table");
        std::string_view rest(payload);
        std::size_t entry = 0;
        auto load_block = [&](const std::string& name, Matrix& m) {
            const auto& t = table.at(entry++);
            if (t.at("name").get<std::string>() != name || t.at("rows").get<std::size_t>() != m.rows() ||
                t.at("cols").get<std::size_t>() != m.cols())
                throw CheckpointError(path.string() + ": tensor " + name + " has unexpected shape");
            read_doubles(rest, m.flat());
        };
        for (std::size_t i = 0; i < kNumTensors; ++i)
            load_block(std::string(kTensorNames[i]), ck.params.tensors[i]);
        for (std::size_t i = 0; i < kNumTensors; ++i) {
            auto& mom = ck.adam.moments[i];
            load_block("adam_m/" + std::string(kTensorNames[i]), mom.m);
            load_block("adam_v/" + std::string(kTensorNames[i]), mom.v);
            mom.step = steps.at(i).get<std::uint64_t>();
        }
        if (!rest.empty()) throw CheckpointError(path.string() + ": trailing payload bytes");
        return ck;
    } catch (const json::exception& e) {
        throw CheckpointError(path.string() + ": malformed header (" + e.what() + ")");
    }
}

}  // namespace relrec
