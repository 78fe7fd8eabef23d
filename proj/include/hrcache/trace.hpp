#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace hrcache {

struct Request {
    double time = 0.0;
    uint64_t key = 0;
    uint64_t size = 0;

    bool operator==(const Request&) const = default;
};

struct Trace {
    std::vector<Request> requests;

    size_t size() const { return requests.size(); }
    bool empty() const { return requests.empty(); }
    const Request& operator[](size_t i) const { return requests[i]; }
};

struct TraceStats {
    uint64_t total_requests = 0;
    uint64_t unique_objects = 0;
    uint64_t total_bytes = 0;
    uint64_t unique_bytes = 0;
    double mean_size = 0.0;
    uint64_t max_size = 0;
};

struct PoissonArrivals {
    double rate = 1.0;
};

struct GParetoArrivals {
    double sigma = 1.0;
    double xi = 0.0;
};

struct ConstantSize {
    uint64_t bytes = 1;
};

struct LognormalSize {
    double mu = 0.0;
    double sigma = 1.0;
};

using ArrivalModel = std::variant<PoissonArrivals, GParetoArrivals>;
using SizeModel = std::variant<ConstantSize, LognormalSize>;

struct SyntheticConfig {
    uint64_t n_objects = 0;
    uint64_t n_requests = 0;
    double popularity_alpha = 0.0;
    ArrivalModel interarrival = PoissonArrivals{};
    SizeModel size_model = ConstantSize{};
    uint64_t seed = 1;

    void validate() const;  // throws UsageError
};

struct ParseOptions {
    // Strict mode rejects a key reappearing with a different size; lenient
    // keeps the first-seen size.
    bool strict_sizes = true;
};

Trace parse_trace(std::istream& in, const ParseOptions& opts = {});

// Sniffs the gzip magic bytes and inflates transparently. "-" reads stdin.
Trace load_trace(const std::string& path, const ParseOptions& opts = {});

// Plain "time key size" lines; parse(write(t)) == t.
void write_trace(const Trace& trace, std::ostream& out);

Trace generate_synthetic(const SyntheticConfig& config);

// Normalized Zipf popularity weights for ranks 1..n, index 0 unused.
std::vector<double> zipf_weights(uint64_t n_objects, double alpha);

// Shift every key by delta; used to keep merged traces' key ranges disjoint.
Trace offset_keys(const Trace& trace, uint64_t delta);

// Stable merge by (time, key).
Trace merge_traces(const Trace& a, const Trace& b);

TraceStats trace_stats(const Trace& trace);

}  // namespace hrcache
