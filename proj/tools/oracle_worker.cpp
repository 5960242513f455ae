// Reference classifier worker speaking the line-delimited JSON protocol:
// requests {"id","side","png_b64"} on stdin, responses {"id","probs"} on
// stdout, one per line, flushed per line. EOF on stdin shuts it down.
//
// Classification is the synthetic color oracle, so a pipeline wired to this
// worker reproduces the in-process oracle bit for bit. The misbehavior flags
// exist to exercise the gateway's protocol checks from tests.

#include "wsipat/classifier.hpp"
#include "wsipat/core.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

using namespace wsipat;

int main(int argc, char** argv) {
    CLI::App app{"wsipat oracle worker"};

    OracleConfig config;
    int shuffle_window = 1;
    int wrong_length_every = 0;
    int wrong_id_every = 0;
    int die_after = -1;
    int sleep_ms = 0;
    bool banner = false;

    app.add_option("--noise", config.noise_rate, "wrong-answer probability");
    app.add_option("--confidence", config.confidence, "confidence of correct answers");
    app.add_option("--low-conf-max", config.low_conf_max, "upper bound of noise confidence");
    app.add_option("--low-conf-levels", config.low_conf_levels, "noise confidence lattice size");
    app.add_option("--seed", config.seed, "draw seed");
    app.add_option("--shuffle-window", shuffle_window,
                   "answer in reverse order within windows of this many requests");
    app.add_option("--wrong-length-every", wrong_length_every,
                   "emit a 5-component vector every Nth response (protocol violation)");
    app.add_option("--wrong-id-every", wrong_id_every,
                   "shift the response id every Nth response (protocol violation)");
    app.add_option("--die-after", die_after, "exit(9) after N responses (worker failure)");
    app.add_option("--sleep-ms", sleep_ms, "sleep per request (timeout testing)");
    app.add_flag("--banner", banner, "write a line to stderr at startup");

    CLI11_PARSE(app, argc, argv);

    if (banner) {
        std::cerr << "oracle worker ready\n";
    }

    std::vector<std::string> pending;
    long responded = 0;

    auto answer = [&](const std::string& line) {
        if (sleep_ms > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(sleep_ms));
        }
        WorkerRequest req;
        try {
            req = parse_worker_request_line(line);
        } catch (const std::exception& e) {
            std::cerr << "bad request: " << e.what() << "\n";
            return false;
        }
        ++responded;
        if (die_after >= 0 && responded > die_after) {
            std::exit(9);
        }

        const ProbabilityVector probs = oracle_classify(req.patch, config, req.id);
        std::uint64_t id = req.id;
        if (wrong_id_every > 0 && responded % wrong_id_every == 0) {
            id += 1000000;
        }
        if (wrong_length_every > 0 && responded % wrong_length_every == 0) {
            std::cout << "{\"id\":" << id << ",\"probs\":[0.2,0.2,0.2,0.2,0.2]}" << std::endl;
        } else {
            std::cout << worker_response_line(id, probs) << std::endl;
        }
        return true;
    };

    auto flush_pending = [&]() {
        for (auto it = pending.rbegin(); it != pending.rend(); ++it) {
            if (!answer(*it)) {
                return false;
            }
        }
        pending.clear();
        return true;
    };

    std::string line;
    while (std::getline(std::cin, line)) {
        if (line.empty()) {
            continue;
        }
        if (shuffle_window <= 1) {
            if (!answer(line)) {
                return 1;
            }
            continue;
        }
        pending.push_back(line);
        if (static_cast<int>(pending.size()) >= shuffle_window) {
            if (!flush_pending()) {
                return 1;
            }
        }
    }
    if (!flush_pending()) {
        return 1;
    }
    return 0;
}
