#include "hrcache/trace.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <queue>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "hrcache/errors.hpp"
#include "hrcache/rng.hpp"

namespace hrcache {

namespace {

bool parse_u64(std::string_view tok, uint64_t& out) {
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return ec == std::errc{} && ptr == tok.data() + tok.size();
}

bool parse_f64(std::string_view tok, double& out) {
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return ec == std::errc{} && ptr == tok.data() + tok.size();
}

[[noreturn]] void line_error(size_t lineno, const std::string& what) {
    throw DataError("trace line " + std::to_string(lineno) + ": " + what);
}

std::string inflate_gzip(std::istream& in) {
    std::string compressed((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    std::string out;
    z_stream zs{};
    if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK)
        throw DataError("gzip: inflateInit failed");
    zs.next_in = reinterpret_cast<Bytef*>(compressed.data());
    zs.avail_in = static_cast<uInt>(compressed.size());
    char buf[1 << 16];
    int ret = Z_OK;
    do {
        zs.next_out = reinterpret_cast<Bytef*>(buf);
        zs.avail_out = sizeof(buf);
        ret = inflate(&zs, Z_NO_FLUSH);
        if (ret != Z_OK && ret != Z_STREAM_END) {
            inflateEnd(&zs);
            throw DataError("gzip: corrupt stream");
        }
        out.append(buf, sizeof(buf) - zs.avail_out);
    } while (ret != Z_STREAM_END && zs.avail_in > 0);
    inflateEnd(&zs);
    if (ret != Z_STREAM_END) throw DataError("gzip: truncated stream");
    return out;
}

}  // namespace

Trace parse_trace(std::istream& in, const ParseOptions& opts) {
    Trace trace;
    std::unordered_map<uint64_t, uint64_t> first_size;
    std::string line;
    size_t lineno = 0;
    double prev_time = -std::numeric_limits<double>::infinity();
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view sv(line);
        std::vector<std::string_view> toks;
        size_t pos = 0;
        while (pos < sv.size()) {
            size_t start = sv.find_first_not_of(" \t\r", pos);
            if (start == std::string_view::npos) break;
            size_t end = sv.find_first_of(" \t\r", start);
            if (end == std::string_view::npos) end = sv.size();
            toks.push_back(sv.substr(start, end - start));
            pos = end;
        }
        if (toks.empty()) continue;  // blank line
        if (toks.size() != 3)
            line_error(lineno, "expected 3 fields (time key size), got " +
                                   std::to_string(toks.size()));
        Request r;
        if (!parse_f64(toks[0], r.time) || !std::isfinite(r.time))
            line_error(lineno, "non-numeric time");
        if (!parse_u64(toks[1], r.key)) line_error(lineno, "non-numeric key");
        if (!parse_u64(toks[2], r.size)) line_error(lineno, "non-numeric size");
        if (r.time < 0) line_error(lineno, "negative time");
        if (r.size == 0) line_error(lineno, "zero size");
        if (r.time < prev_time) line_error(lineno, "time goes backwards");
        prev_time = r.time;

        auto [it, fresh] = first_size.emplace(r.key, r.size);
        if (!fresh && it->second != r.size) {
            if (opts.strict_sizes)
                line_error(lineno, "key " + std::to_string(r.key) +
                                       " changes size from " +
                                       std::to_string(it->second) + " to " +
                                       std::to_string(r.size));
            r.size = it->second;
        }
        trace.requests.push_back(r);
    }
    return trace;
}

Trace load_trace(const std::string& path, const ParseOptions& opts) {
    if (path == "-") return parse_trace(std::cin, opts);
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open trace file: " + path);
    int c0 = f.get(), c1 = f.get();
    f.seekg(0);
    if (c0 == 0x1f && c1 == 0x8b) {
        std::string text = inflate_gzip(f);
        std::istringstream s(text);
        return parse_trace(s, opts);
    }
    return parse_trace(f, opts);
}

void write_trace(const Trace& trace, std::ostream& out) {
    char buf[64];
    for (const Request& r : trace.requests) {
        snprintf(buf, sizeof(buf), "%.17g", r.time);
        out << buf << ' ' << r.key << ' ' << r.size << '\n';
    }
}

void SyntheticConfig::validate() const {
    if (n_objects == 0) throw UsageError("synthetic: n_objects must be > 0");
    if (n_requests == 0) throw UsageError("synthetic: n_requests must be > 0");
    if (popularity_alpha < 0)
        throw UsageError("synthetic: popularity_alpha must be >= 0");
    if (const auto* p = std::get_if<PoissonArrivals>(&interarrival)) {
        if (p->rate <= 0) throw UsageError("synthetic: poisson rate must be > 0");
    } else {
        const auto& g = std::get<GParetoArrivals>(interarrival);
        if (g.sigma <= 0) throw UsageError("synthetic: gpareto sigma must be > 0");
        if (g.xi < 0) throw UsageError("synthetic: gpareto xi must be >= 0");
    }
    if (const auto* c = std::get_if<ConstantSize>(&size_model)) {
        if (c->bytes == 0) throw UsageError("synthetic: constant size must be > 0");
    } else {
        const auto& l = std::get<LognormalSize>(size_model);
        if (l.sigma < 0) throw UsageError("synthetic: lognormal sigma must be >= 0");
    }
}

std::vector<double> zipf_weights(uint64_t n_objects, double alpha) {
    std::vector<double> w(n_objects + 1, 0.0);
    double total = 0.0;
    for (uint64_t k = 1; k <= n_objects; ++k) {
        w[k] = std::pow(static_cast<double>(k), -alpha);
        total += w[k];
    }
    for (uint64_t k = 1; k <= n_objects; ++k) w[k] /= total;
    return w;
}

Trace generate_synthetic(const SyntheticConfig& config) {
    config.validate();
    const uint64_t n = config.n_objects;
    std::vector<double> w = zipf_weights(n, config.popularity_alpha);

    std::vector<Rng> rngs;
    rngs.reserve(n);
    for (uint64_t k = 1; k <= n; ++k)
        rngs.emplace_back(mix_seed(config.seed, k));

    std::vector<uint64_t> sizes(n + 1, 0);
    if (const auto* c = std::get_if<ConstantSize>(&config.size_model)) {
        for (uint64_t k = 1; k <= n; ++k) sizes[k] = c->bytes;
    } else {
        const auto& l = std::get<LognormalSize>(config.size_model);
        Rng size_rng(mix_seed(config.seed, 0x5a5a5a5aULL));
        for (uint64_t k = 1; k <= n; ++k) {
            double s = std::exp(l.mu + l.sigma * size_rng.normal());
            sizes[k] = std::max<uint64_t>(1, static_cast<uint64_t>(std::llround(s)));
        }
    }

    auto draw_gap = [&](uint64_t key) -> double {
        Rng& rng = rngs[key - 1];
        if (const auto* p = std::get_if<PoissonArrivals>(&config.interarrival)) {
            double rate = p->rate * static_cast<double>(n) * w[key];
            return rng.exponential(rate);
        }
        const auto& g = std::get<GParetoArrivals>(config.interarrival);
        double sigma_k = g.sigma / (static_cast<double>(n) * w[key]);
        return rng.generalized_pareto(sigma_k, g.xi);
    };

    // Per-object renewal processes merged by earliest next arrival; ties
    // resolve by key ascending.
    struct Arrival {
        double t;
        uint64_t key;
        bool operator>(const Arrival& o) const {
            if (t != o.t) return t > o.t;
            return key > o.key;
        }
    };
    std::priority_queue<Arrival, std::vector<Arrival>, std::greater<>> heap;
    for (uint64_t k = 1; k <= n; ++k) heap.push({draw_gap(k), k});

    Trace trace;
    trace.requests.reserve(config.n_requests);
    while (trace.requests.size() < config.n_requests) {
        Arrival a = heap.top();
        heap.pop();
        trace.requests.push_back({a.t, a.key, sizes[a.key]});
        heap.push({a.t + draw_gap(a.key), a.key});
    }
    return trace;
}

Trace offset_keys(const Trace& trace, uint64_t delta) {
    Trace out = trace;
    for (Request& r : out.requests) r.key += delta;
    return out;
}

Trace merge_traces(const Trace& a, const Trace& b) {
    Trace out;
    out.requests.resize(a.size() + b.size());
    std::merge(a.requests.begin(), a.requests.end(), b.requests.begin(),
               b.requests.end(), out.requests.begin(),
               [](const Request& x, const Request& y) {
                   if (x.time != y.time) return x.time < y.time;
                   return x.key < y.key;
               });
    return out;
}

TraceStats trace_stats(const Trace& trace) {
    TraceStats s;
    std::unordered_map<uint64_t, uint64_t> seen;
    for (const Request& r : trace.requests) {
        s.total_requests++;
        s.total_bytes += r.size;
        s.max_size = std::max(s.max_size, r.size);
        auto [it, fresh] = seen.emplace(r.key, r.size);
        if (fresh) s.unique_bytes += r.size;
    }
    s.unique_objects = seen.size();
    s.mean_size = s.total_requests
                      ? static_cast<double>(s.total_bytes) / s.total_requests
                      : 0.0;
    return s;
}

}  // namespace hrcache
