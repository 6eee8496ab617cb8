#pragma once

// Versioned JSON checkpoints.
//
// Written with a deterministic emitter (fixed key order, shortest round-trip
// float formatting, LF endings) so save -> load -> save is byte-identical.
// Parameters are stored as decimal float arrays for diffability; 64-bit
// state words go through decimal strings because JSON numbers cannot carry
// full u64 precision. Loading refuses a checkpoint whose config digest does
// not match the resuming configuration.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cagm/error.hpp"
#include "cagm/format.hpp"
#include "cagm/linalg.hpp"

namespace cagm {

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
    int format_version = kCheckpointFormatVersion;
    std::string run_id;
    int phase = 1;
    long long step = 0;       // updates applied so far
    long long epoch = 0;      // epoch of the NEXT batch to consume
    long long epoch_pos = 0;  // batch index within that epoch
    std::uint64_t run_seed = 0;
    Vec params;
    std::vector<Vec> embed_params;  // one vector per hierarchy level; empty before phase 2
    std::array<std::uint64_t, 4> prng_state{};  // batch-stream generator state for `epoch`
    std::string optimizer_config_hash;
    std::string config_digest;
};

namespace detail {

inline void emit_double_array(std::ostringstream& out, const Vec& values) {
    out << '[';
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out << ',';
        out << format_double(values[i]);
    }
    out << ']';
}

}  // namespace detail

inline std::string checkpoint_to_json(const Checkpoint& c) {
    std::ostringstream out;
    out << "{\n";
    out << "  \"config_digest\": \"" << c.config_digest << "\",\n";
    out << "  \"embed_params\": [";
    for (std::size_t k = 0; k < c.embed_params.size(); ++k) {
        if (k) out << ',';
        detail::emit_double_array(out, c.embed_params[k]);
    }
    out << "],\n";
    out << "  \"epoch\": " << c.epoch << ",\n";
    out << "  \"epoch_pos\": " << c.epoch_pos << ",\n";
    out << "  \"format_version\": " << c.format_version << ",\n";
    out << "  \"optimizer_config_hash\": \"" << c.optimizer_config_hash << "\",\n";
    out << "  \"params\": ";
    detail::emit_double_array(out, c.params);
    out << ",\n";
    out << "  \"phase\": " << c.phase << ",\n";
    out << "  \"prng_state\": [";
    for (std::size_t i = 0; i < c.prng_state.size(); ++i) {
        if (i) out << ',';
        out << '"' << format_u64(c.prng_state[i]) << '"';
    }
    out << "],\n";
    out << "  \"run_id\": \"" << c.run_id << "\",\n";
    out << "  \"run_seed\": \"" << format_u64(c.run_seed) << "\",\n";
    out << "  \"step\": " << c.step << "\n";
    out << "}\n";
    return out.str();
}

inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("save_checkpoint: cannot open " + path.string());
    out << checkpoint_to_json(c);
}

inline Checkpoint checkpoint_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("checkpoint: malformed JSON: ") + e.what());
    }
    Checkpoint c;
    try {
        c.format_version = j.at("format_version").get<int>();
        if (c.format_version != kCheckpointFormatVersion)
            throw ValidationError("checkpoint: unsupported format_version " +
                                  std::to_string(c.format_version));
        c.run_id = j.at("run_id").get<std::string>();
        c.phase = j.at("phase").get<int>();
        c.step = j.at("step").get<long long>();
        c.epoch = j.at("epoch").get<long long>();
        c.epoch_pos = j.at("epoch_pos").get<long long>();
        c.run_seed = parse_u64(j.at("run_seed").get<std::string>());
        c.params = j.at("params").get<Vec>();
        c.embed_params = j.at("embed_params").get<std::vector<Vec>>();
        const auto state = j.at("prng_state").get<std::vector<std::string>>();
        if (state.size() != 4) throw ValidationError("checkpoint: prng_state needs 4 words");
        for (std::size_t i = 0; i < 4; ++i)
            c.prng_state[i] = parse_u64(state[i]);
        c.optimizer_config_hash = j.at("optimizer_config_hash").get<std::string>();
        c.config_digest = j.at("config_digest").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("checkpoint: missing or mistyped field: ") + e.what());
    }
    return c;
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("load_checkpoint: cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return checkpoint_from_json(buffer.str());
}

}  // namespace cagm
