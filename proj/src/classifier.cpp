#include "wsipat/classifier.hpp"

#include "wsipat/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <iostream>
#include <map>
#include <mutex>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

namespace wsipat {

const std::array<Rgb, kPatternCount>& default_class_colors() {
    static const std::array<Rgb, kPatternCount> colors = {
        Rgb{0, 160, 0},     // lepidic
        Rgb{0, 64, 224},    // acinar
        Rgb{240, 150, 0},   // papillary
        Rgb{220, 0, 40},    // micropapillary
        Rgb{128, 0, 160},   // solid
        Rgb{235, 235, 235}, // benign (glass, stroma, artifacts)
    };
    return colors;
}

int ClassifierHandle::batch_size() const {
    if (const auto* w = std::get_if<WorkerConfig>(&config)) {
        return w->batch_size;
    }
    return std::get<OracleConfig>(config).batch_size;
}

HistologicPattern dominant_class(const Image& patch,
                                 const std::array<Rgb, kPatternCount>& class_colors) {
    std::array<std::uint64_t, kPatternCount> votes{};
    const auto& bytes = patch.bytes();
    for (std::size_t i = 0; i + 2 < bytes.size(); i += 3) {
        int best = 0;
        long best_d = -1;
        for (std::size_t k = 0; k < kPatternCount; ++k) {
            const long dr = static_cast<long>(bytes[i]) - class_colors[k].r;
            const long dg = static_cast<long>(bytes[i + 1]) - class_colors[k].g;
            const long db = static_cast<long>(bytes[i + 2]) - class_colors[k].b;
            const long d = dr * dr + dg * dg + db * db;
            if (best_d < 0 || d < best_d) {
                best_d = d;
                best = static_cast<int>(k);
            }
        }
        ++votes[best];
    }
    std::size_t winner = 0;
    for (std::size_t k = 1; k < kPatternCount; ++k) {
        if (votes[k] > votes[winner]) {
            winner = k; // strict > keeps ties on the lower index
        }
    }
    return kAllPatterns[winner];
}

namespace {

void validate_oracle(const OracleConfig& c) {
    if (!(c.noise_rate >= 0.0 && c.noise_rate <= 1.0)) {
        throw FormatError("oracle noise_rate must lie in [0,1]");
    }
    if (!(c.confidence > 1.0 / 6.0 && c.confidence <= 1.0)) {
        throw FormatError("oracle confidence must lie in (1/6, 1]");
    }
    if (!(c.low_conf_max > 1.0 / 6.0 && c.low_conf_max <= 1.0)) {
        throw FormatError("oracle low_conf_max must lie in (1/6, 1]");
    }
    if (c.low_conf_levels < 1) {
        throw FormatError("oracle low_conf_levels must be >= 1");
    }
    if (c.batch_size < 1) {
        throw FormatError("oracle batch_size must be >= 1");
    }
}

ProbabilityVector one_hot_spread(std::size_t hot, double confidence) {
    std::array<double, kPatternCount> p{};
    const double rest = (1.0 - confidence) / (kPatternCount - 1);
    p.fill(rest);
    p[hot] = confidence;
    return ProbabilityVector::renormalized(p);
}

} // namespace

ProbabilityVector oracle_classify(const Image& patch, const OracleConfig& config,
                                  std::uint64_t draw_index) {
    validate_oracle(config);
    const std::size_t mapped = pattern_index(dominant_class(patch, config.class_colors));
    Rng rng = Rng::stream(config.seed, draw_index);

    if (!rng.next_coin(config.noise_rate)) {
        return one_hot_spread(mapped, config.confidence);
    }

    // Wrong answer with low confidence. The confidence lattice is uniform
    // over (1/6, low_conf_max] and includes the top value.
    std::size_t wrong = rng.next_below(kPatternCount - 1);
    if (wrong >= mapped) {
        ++wrong;
    }
    const double lo = 1.0 / 6.0;
    const std::uint64_t level = 1 + rng.next_below(static_cast<std::uint64_t>(config.low_conf_levels));
    const double conf =
        lo + (config.low_conf_max - lo) * static_cast<double>(level) / config.low_conf_levels;
    return one_hot_spread(wrong, conf);
}

// =============================================================================
// Worker subprocess
// =============================================================================

namespace {

void ignore_sigpipe_once() {
    static std::once_flag flag;
    std::call_once(flag, [] { std::signal(SIGPIPE, SIG_IGN); });
}

[[noreturn]] void child_exec(const std::vector<std::string>& command, int in_fd, int out_fd,
                             int err_fd) {
    dup2(in_fd, STDIN_FILENO);
    dup2(out_fd, STDOUT_FILENO);
    dup2(err_fd, STDERR_FILENO);
    // Close everything else we inherited.
    for (int fd = 3; fd < 256; ++fd) {
        close(fd);
    }
    std::vector<char*> argv;
    argv.reserve(command.size() + 1);
    for (const std::string& a : command) {
        argv.push_back(const_cast<char*>(a.c_str()));
    }
    argv.push_back(nullptr);
    execvp(argv[0], argv.data());
    std::perror("execvp");
    _exit(127);
}

} // namespace

struct Classifier::WorkerProcess {
    pid_t pid = -1;
    int stdin_fd = -1;
    int stdout_fd = -1;
    int stderr_fd = -1;
    std::string out_buf;
    std::string err_buf;

    explicit WorkerProcess(const WorkerConfig& cfg) {
        if (cfg.command.empty()) {
            throw FormatError("worker command must not be empty");
        }
        ignore_sigpipe_once();
        int in_pipe[2], out_pipe[2], err_pipe[2];
        if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0 || pipe(err_pipe) != 0) {
            throw WorkerFailed("pipe() failed: " + std::string(std::strerror(errno)));
        }
        pid = fork();
        if (pid < 0) {
            throw WorkerFailed("fork() failed: " + std::string(std::strerror(errno)));
        }
        if (pid == 0) {
            close(in_pipe[1]);
            close(out_pipe[0]);
            close(err_pipe[0]);
            child_exec(cfg.command, in_pipe[0], out_pipe[1], err_pipe[1]);
        }
        close(in_pipe[0]);
        close(out_pipe[1]);
        close(err_pipe[1]);
        stdin_fd = in_pipe[1];
        stdout_fd = out_pipe[0];
        stderr_fd = err_pipe[0];
        fcntl(stdin_fd, F_SETFL, O_NONBLOCK);
        fcntl(stdout_fd, F_SETFL, O_NONBLOCK);
        fcntl(stderr_fd, F_SETFL, O_NONBLOCK);
    }

    ~WorkerProcess() {
        if (stdin_fd >= 0) {
            close(stdin_fd); // EOF asks the worker to shut down
        }
        if (stdout_fd >= 0) {
            close(stdout_fd);
        }
        if (stderr_fd >= 0) {
            close(stderr_fd);
        }
        if (pid > 0) {
            int status = 0;
            // Give it a moment, then force.
            for (int i = 0; i < 50; ++i) {
                if (waitpid(pid, &status, WNOHANG) == pid) {
                    return;
                }
                usleep(10000);
            }
            kill(pid, SIGKILL);
            waitpid(pid, &status, 0);
        }
    }

    void drain_stderr() {
        char buf[4096];
        for (;;) {
            const ssize_t n = read(stderr_fd, buf, sizeof(buf));
            if (n <= 0) {
                return;
            }
            err_buf.append(buf, static_cast<std::size_t>(n));
            // Forward whole lines verbatim.
            std::size_t nl;
            while ((nl = err_buf.find('\n')) != std::string::npos) {
                std::cerr << "[worker] " << err_buf.substr(0, nl) << "\n";
                err_buf.erase(0, nl + 1);
            }
        }
    }

    [[noreturn]] void fail(const std::string& what) {
        int status = 0;
        std::string detail = what;
        if (waitpid(pid, &status, WNOHANG) == pid) {
            pid = -1;
            if (WIFEXITED(status)) {
                detail += " (worker exited with status " + std::to_string(WEXITSTATUS(status)) + ")";
            } else if (WIFSIGNALED(status)) {
                detail += " (worker killed by signal " + std::to_string(WTERMSIG(status)) + ")";
            }
        }
        throw WorkerFailed(detail);
    }

    // Writes all request lines and collects one response line per id.
    // The deadline is an inactivity limit: it resets whenever bytes move.
    std::map<std::uint64_t, std::string> exchange(const std::string& outgoing,
                                                  const std::vector<std::uint64_t>& ids,
                                                  double timeout_seconds) {
        std::map<std::uint64_t, std::string> responses;
        std::size_t sent = 0;
        std::size_t expected = ids.size();

        auto take_lines = [&]() {
            std::size_t nl;
            while ((nl = out_buf.find('\n')) != std::string::npos) {
                std::string line = out_buf.substr(0, nl);
                out_buf.erase(0, nl + 1);
                if (line.empty()) {
                    continue;
                }
                nlohmann::json j;
                try {
                    j = nlohmann::json::parse(line);
                } catch (const nlohmann::json::exception&) {
                    fail("malformed worker response line: " + line.substr(0, 200));
                }
                if (!j.contains("id") || !j["id"].is_number_unsigned()) {
                    fail("worker response missing numeric id");
                }
                const std::uint64_t id = j["id"].get<std::uint64_t>();
                if (responses.count(id)) {
                    throw ProtocolViolation("duplicate response id " + std::to_string(id));
                }
                responses[id] = std::move(line);
            }
        };

        while (responses.size() < expected) {
            pollfd fds[3];
            nfds_t nfds = 0;
            const int out_slot = static_cast<int>(nfds);
            fds[nfds++] = pollfd{stdout_fd, POLLIN, 0};
            const int err_slot = static_cast<int>(nfds);
            fds[nfds++] = pollfd{stderr_fd, POLLIN, 0};
            int in_slot = -1;
            if (sent < outgoing.size()) {
                in_slot = static_cast<int>(nfds);
                fds[nfds++] = pollfd{stdin_fd, POLLOUT, 0};
            }
            const int rc = poll(fds, nfds, static_cast<int>(timeout_seconds * 1000.0));
            if (rc < 0) {
                if (errno == EINTR) {
                    continue;
                }
                fail("poll() failed: " + std::string(std::strerror(errno)));
            }
            if (rc == 0) {
                fail("worker timed out after " + std::to_string(timeout_seconds) +
                     " s of inactivity");
            }
            if (fds[err_slot].revents & POLLIN) {
                drain_stderr();
            }
            if (in_slot >= 0 && (fds[in_slot].revents & (POLLOUT | POLLERR))) {
                const ssize_t n =
                    write(stdin_fd, outgoing.data() + sent, outgoing.size() - sent);
                if (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK) {
                    fail("write to worker failed: " + std::string(std::strerror(errno)));
                }
                if (n > 0) {
                    sent += static_cast<std::size_t>(n);
                }
            }
            if (fds[out_slot].revents & (POLLIN | POLLHUP)) {
                char buf[65536];
                const ssize_t n = read(stdout_fd, buf, sizeof(buf));
                if (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK) {
                    fail("read from worker failed: " + std::string(std::strerror(errno)));
                }
                if (n == 0) {
                    drain_stderr();
                    take_lines();
                    if (responses.size() < expected) {
                        fail("worker closed stdout before answering all requests");
                    }
                    break;
                }
                if (n > 0) {
                    out_buf.append(buf, static_cast<std::size_t>(n));
                    take_lines();
                }
            }
        }
        drain_stderr();
        return responses;
    }
};

Classifier::Classifier(ClassifierHandle handle) : handle_(std::move(handle)) {
    if (const auto* o = std::get_if<OracleConfig>(&handle_.config)) {
        validate_oracle(*o);
    } else {
        const auto& w = std::get<WorkerConfig>(handle_.config);
        if (w.batch_size < 1) {
            throw FormatError("worker batch_size must be >= 1");
        }
        if (w.command.empty()) {
            throw FormatError("worker command must not be empty");
        }
    }
}

Classifier::~Classifier() = default;
Classifier::Classifier(Classifier&&) noexcept = default;
Classifier& Classifier::operator=(Classifier&&) noexcept = default;

std::string worker_request_line(std::uint64_t id, const Image& patch) {
    const std::vector<std::uint8_t> png = encode_png(patch);
    nlohmann::json j;
    j["id"] = id;
    j["side"] = patch.width();
    j["png_b64"] = base64_encode(png.data(), png.size());
    return j.dump();
}

WorkerRequest parse_worker_request_line(const std::string& line) {
    nlohmann::json j = nlohmann::json::parse(line);
    WorkerRequest req;
    req.id = j.at("id").get<std::uint64_t>();
    req.side = j.at("side").get<int>();
    const std::vector<std::uint8_t> png = base64_decode(j.at("png_b64").get<std::string>());
    req.patch = decode_png(png.data(), png.size());
    if (req.patch.width() != req.side || req.patch.height() != req.side) {
        throw FormatError("request side does not match the encoded patch");
    }
    return req;
}

std::string worker_response_line(std::uint64_t id, const ProbabilityVector& probs) {
    nlohmann::json j;
    j["id"] = id;
    j["probs"] = probs.values();
    return j.dump();
}

std::vector<ProbabilityVector> Classifier::classify_batch(std::span<const Image> patches,
                                                          std::uint64_t first_draw_index) {
    if (patches.empty()) {
        return {};
    }
    const int side = patches.front().width();
    for (const Image& p : patches) {
        if (p.width() != p.height() || p.width() != side) {
            throw FormatError("classify_batch requires square patches of one size");
        }
    }

    if (const auto* oracle = std::get_if<OracleConfig>(&handle_.config)) {
        std::vector<ProbabilityVector> out;
        out.reserve(patches.size());
        for (std::size_t i = 0; i < patches.size(); ++i) {
            out.push_back(oracle_classify(patches[i], *oracle, first_draw_index + i));
        }
        return out;
    }

    const auto& cfg = std::get<WorkerConfig>(handle_.config);
    if (!worker_) {
        worker_ = std::make_unique<WorkerProcess>(cfg);
    }

    std::string outgoing;
    std::vector<std::uint64_t> ids;
    ids.reserve(patches.size());
    for (std::size_t i = 0; i < patches.size(); ++i) {
        const std::uint64_t id = first_draw_index + i;
        ids.push_back(id);
        outgoing += worker_request_line(id, patches[i]);
        outgoing += '\n';
    }

    const auto responses = worker_->exchange(outgoing, ids, cfg.timeout_seconds);

    std::vector<ProbabilityVector> out;
    out.reserve(patches.size());
    for (std::uint64_t id : ids) {
        const auto it = responses.find(id);
        if (it == responses.end()) {
            throw ProtocolViolation("no response for request id " + std::to_string(id));
        }
        nlohmann::json j = nlohmann::json::parse(it->second);
        if (!j.contains("probs") || !j["probs"].is_array()) {
            throw ProtocolViolation("response " + std::to_string(id) + " lacks a probs array");
        }
        if (j["probs"].size() != kPatternCount) {
            throw ProtocolViolation("response " + std::to_string(id) + " carries " +
                                    std::to_string(j["probs"].size()) +
                                    " probabilities, expected 6");
        }
        std::array<double, kPatternCount> p{};
        for (std::size_t k = 0; k < kPatternCount; ++k) {
            if (!j["probs"][k].is_number()) {
                throw ProtocolViolation("non-numeric probability in response " + std::to_string(id));
            }
            p[k] = j["probs"][k].get<double>();
        }
        try {
            out.push_back(ProbabilityVector::renormalized(p));
        } catch (const InvalidProbability& e) {
            throw ProtocolViolation("response " + std::to_string(id) + ": " + e.what());
        }
    }

    // Unexpected extra ids mean the worker answered requests we never sent.
    for (const auto& [id, line] : responses) {
        if (std::find(ids.begin(), ids.end(), id) == ids.end()) {
            throw ProtocolViolation("response for unknown request id " + std::to_string(id));
        }
    }
    return out;
}

} // namespace wsipat
