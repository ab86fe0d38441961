#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aegis/pcap.hpp"
#include "aegis/physics.hpp"

namespace aegis {

enum class ProfileKind { benign_stochastic, c2_beacon, morphed_beacon };

const char* profile_kind_name(ProfileKind k);
ProfileKind profile_kind_from_name(const std::string& name);

struct IatLaw {
    enum class Type { lognormal, fixed };
    Type type = Type::lognormal;
    // lognormal parameters, log-seconds
    double mu = -4.0;
    double sigma = 1.2;
    // fixed-period parameters
    double period = 1.0;
    double jitter_fraction = 0.001;
};

struct SizeLaw {
    enum class Type { empirical_mixture, fixed };
    Type type = Type::empirical_mixture;
    double bytes = 128;
    double jitter = 2;
};

/// Generator profile for one traffic kind. Defaults follow the kind:
/// benign_stochastic draws log-normal IATs and mixed frame sizes; c2_beacon
/// emits fixed-period IATs with near-constant sizes, windows and flags;
/// morphed_beacon copies the benign size/window/flag/direction laws but
/// keeps beacon timing (volumetric anchoring).
struct TrafficProfile {
    ProfileKind kind = ProfileKind::benign_stochastic;
    IatLaw iat_law;
    SizeLaw size_law;
    uint64_t seed = 1;

    static TrafficProfile defaults(ProfileKind kind, uint64_t seed = 1);
};

/// Seed-deterministic packet stream; flows are generated independently from
/// per-flow derived seeds and emitted in (flow index, packet index) order.
/// Timestamps are quantized to whole microseconds so pcap round-trips are
/// exact.
std::vector<PacketRecord> generate(const TrafficProfile& profile, int flows,
                                   int packets_per_flow);

struct NoiseSpec {
    double level = 0.0;                     // fraction of the per-column std
    std::vector<int> target_columns = {COL_IAT};
    uint64_t seed = 1;
};

/// Add zero-mean Gaussian noise with std = level * per-column std of the
/// window set, to the target columns only. Label-preserving and
/// seed-deterministic.
std::vector<FlowWindow> inject_noise(const std::vector<FlowWindow>& windows,
                                     const NoiseSpec& spec);

struct CorpusProfileSpec {
    TrafficProfile profile;
    int label = 0;
    int flows = 10;
    int packets_per_flow = 1000;
};

struct CorpusConfig {
    int n = 100; // window length
    uint64_t seed = 1;
    double test_fraction = 0.2;
    std::vector<CorpusProfileSpec> profiles;
};

struct CorpusResult {
    NormStats stats; // fitted on the train split only
    std::vector<FlowWindow> train;
    std::vector<FlowWindow> test;
    std::vector<uint64_t> windows_per_profile;
};

/// Build the labeled corpus: windows per profile, stratified 80/20 split by
/// (label, profile), NormStats fitted on train rows only. Throws
/// InsufficientData.
CorpusResult build_corpus(const CorpusConfig& config);

/// Plain-text key=value corpus description (see docs/formats.md). Lines
/// starting with '#' are comments.
CorpusConfig parse_corpus_config(const std::string& path);

/// The seed-pinned desk-scale corpus used by the evaluation harness:
/// 1000 benign / 500 c2 / 500 morphed windows of n=100.
CorpusConfig desk_corpus_config(uint64_t seed = 7);

} // namespace aegis
