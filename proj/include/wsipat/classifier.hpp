#pragma once

#include "wsipat/core.hpp"
#include "wsipat/image.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

// =============================================================================
// Classifier gateway: one interface producing a ProbabilityVector per patch,
// backed either by the deterministic synthetic oracle (tests, demos) or by an
// external worker process speaking newline-delimited JSON.
// =============================================================================

namespace wsipat {

struct WorkerFailed : Error {
    using Error::Error;
};

struct ProtocolViolation : Error {
    using Error::Error;
};

// Flat paint colors identifying each class on synthetic slides; the oracle
// maps a patch back to a class by nearest color, so synth and oracle must
// share this table.
const std::array<Rgb, kPatternCount>& default_class_colors();

// Synthetic oracle. With probability (1 - noise_rate) the patch's dominant
// class receives `confidence` and the rest is spread uniformly; otherwise a
// uniformly drawn wrong class receives a low confidence from a uniform
// lattice over (1/6, low_conf_max] (the top value included, so a threshold
// sitting exactly on low_conf_max still sees noise). All draws are fixed by
// (seed, draw_index).
struct OracleConfig {
    std::array<Rgb, kPatternCount> class_colors = default_class_colors();
    double noise_rate = 0.0;
    double confidence = 0.9;
    double low_conf_max = 0.3;
    int low_conf_levels = 8;
    std::uint64_t seed = 0;
    int batch_size = 256; // draws are per patch index, so this is cosmetic
};

struct WorkerConfig {
    std::vector<std::string> command; // argv; resolved via PATH
    int batch_size = 32;
    double timeout_seconds = 30.0; // inactivity limit while waiting on the worker
};

struct ClassifierHandle {
    std::variant<OracleConfig, WorkerConfig> config;

    int batch_size() const;
};

// Majority vote over per-pixel nearest colors; ties toward the lower
// canonical index.
HistologicPattern dominant_class(const Image& patch,
                                 const std::array<Rgb, kPatternCount>& class_colors);

ProbabilityVector oracle_classify(const Image& patch, const OracleConfig& config,
                                  std::uint64_t draw_index);

// Runtime classifier. A worker process is spawned lazily on first use and
// kept alive until destruction (stdin EOF asks it to shut down). One
// Classifier must not be shared between threads without external locking;
// spawn one per thread instead.
class Classifier {
public:
    explicit Classifier(ClassifierHandle handle);
    ~Classifier();

    Classifier(const Classifier&) = delete;
    Classifier& operator=(const Classifier&) = delete;
    Classifier(Classifier&&) noexcept;
    Classifier& operator=(Classifier&&) noexcept;

    // One probability vector per patch, in patch order. Patch i is classified
    // under draw index / request id first_draw_index + i, so results do not
    // depend on how a caller slices its patches into batches. Every returned
    // vector is validated (and renormalized within 1e-6) at this boundary.
    std::vector<ProbabilityVector> classify_batch(std::span<const Image> patches,
                                                  std::uint64_t first_draw_index = 0);

    const ClassifierHandle& handle() const { return handle_; }

private:
    struct WorkerProcess;

    ClassifierHandle handle_;
    std::unique_ptr<WorkerProcess> worker_;
};

// Wire format helpers, shared with the bundled reference worker.
std::string worker_request_line(std::uint64_t id, const Image& patch);
struct WorkerRequest {
    std::uint64_t id = 0;
    int side = 0;
    Image patch;
};
WorkerRequest parse_worker_request_line(const std::string& line);
std::string worker_response_line(std::uint64_t id, const ProbabilityVector& probs);

} // namespace wsipat
