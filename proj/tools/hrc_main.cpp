#include <zlib.h>

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hrcache/engine.hpp"
#include "hrcache/errors.hpp"
#include "hrcache/hr_cache.hpp"
#include "hrcache/oracle.hpp"
#include "hrcache/rng.hpp"
#include "hrcache/trace.hpp"

using nlohmann::json;

namespace {

using namespace hrcache;

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write output file: " + path);
    f << text;
}

void write_gzip(const std::string& path, const std::string& text) {
    gzFile gz = gzopen(path.c_str(), "wb");
    if (!gz) throw DataError("cannot write gzip file: " + path);
    if (gzwrite(gz, text.data(), static_cast<unsigned>(text.size())) !=
        static_cast<int>(text.size())) {
        gzclose(gz);
        throw DataError("gzip write failed: " + path);
    }
    gzclose(gz);
}

SyntheticConfig parse_synth_config(const json& j) {
    SyntheticConfig cfg;
    try {
        cfg.n_objects = j.at("n_objects").get<uint64_t>();
        cfg.n_requests = j.at("n_requests").get<uint64_t>();
        cfg.popularity_alpha = j.at("popularity_alpha").get<double>();
        cfg.seed = j.value("seed", 1ULL);

        const json& ia = j.at("interarrival");
        std::string model = ia.at("model").get<std::string>();
        if (model == "poisson") {
            cfg.interarrival = PoissonArrivals{ia.at("rate").get<double>()};
        } else if (model == "generalized_pareto") {
            cfg.interarrival = GParetoArrivals{ia.at("sigma").get<double>(),
                                               ia.at("xi").get<double>()};
        } else {
            throw UsageError("gen: unknown interarrival model '" + model + "'");
        }

        const json& sm = j.at("size_model");
        model = sm.at("model").get<std::string>();
        if (model == "constant") {
            cfg.size_model = ConstantSize{sm.at("bytes").get<uint64_t>()};
        } else if (model == "lognormal") {
            cfg.size_model = LognormalSize{sm.at("mu").get<double>(),
                                           sm.at("sigma").get<double>()};
        } else {
            throw UsageError("gen: unknown size model '" + model + "'");
        }
    } catch (const json::exception& e) {
        throw UsageError("gen: bad config: " + std::string(e.what()));
    }
    cfg.validate();
    return cfg;
}

struct WindowFlags {
    double multiplier = 3.0;
    uint64_t op_budget = 5'000'000;
    int batch_size = 128;
    double decay = 0.9;
    bool no_look_back = false;
    std::string hazard_mode = "kernel";
    double bandwidth_scale = 1.0;
    uint64_t min_labels = 200;
    uint64_t seed = 1;

    void attach(CLI::App* cmd) {
        cmd->add_option("--window-multiplier", multiplier,
                        "window closes at unique bytes >= multiplier * capacity");
        cmd->add_option("--op-budget", op_budget,
                        "oracle reconstruction operation budget per window");
        cmd->add_option("--batch-size", batch_size, "prediction batch size");
        cmd->add_option("--decay", decay, "frequency decay per request");
        cmd->add_flag("--no-look-back", no_look_back,
                      "label requests by their own oracle hit instead of "
                      "marking the previous request");
        cmd->add_option("--hazard-mode", hazard_mode,
                        "hazard estimator: kernel or poisson")
            ->check(CLI::IsMember({"kernel", "poisson"}));
        cmd->add_option("--bandwidth-scale", bandwidth_scale,
                        "kernel bandwidth = scale * median gap");
        cmd->add_option("--min-labels", min_labels,
                        "skip training when a window yields fewer labels");
        cmd->add_option("--seed", seed, "sampling seed");
    }

    WindowConfig to_config() const {
        WindowConfig cfg;
        cfg.multiplier = multiplier;
        cfg.op_budget = op_budget;
        cfg.batch_size = batch_size;
        cfg.decay = decay;
        cfg.look_back = !no_look_back;
        cfg.hazard_mode =
            hazard_mode == "poisson" ? HazardMode::poisson : HazardMode::kernel;
        cfg.bandwidth_scale = bandwidth_scale;
        cfg.min_labels = min_labels;
        cfg.seed = seed;
        cfg.validate();
        return cfg;
    }
};

int cmd_stats(const std::string& trace_path, bool lenient,
              const std::string& out) {
    Trace trace = load_trace(trace_path, {.strict_sizes = !lenient});
    TraceStats s = trace_stats(trace);
    if (ends_with(out, ".csv")) {
        char buf[256];
        snprintf(buf, sizeof(buf),
                 "total_requests,unique_objects,total_bytes,unique_bytes,"
                 "mean_size,max_size\n%llu,%llu,%llu,%llu,%.6g,%llu\n",
                 (unsigned long long)s.total_requests,
                 (unsigned long long)s.unique_objects,
                 (unsigned long long)s.total_bytes,
                 (unsigned long long)s.unique_bytes, s.mean_size,
                 (unsigned long long)s.max_size);
        write_output(out, buf);
        return 0;
    }
    json j;
    j["total_requests"] = s.total_requests;
    j["unique_objects"] = s.unique_objects;
    j["total_bytes"] = s.total_bytes;
    j["unique_bytes"] = s.unique_bytes;
    j["mean_size"] = round6(s.mean_size);
    j["max_size"] = s.max_size;
    write_output(out, j.dump(2) + "\n");
    return 0;
}

int cmd_gen(const std::string& config_path, const std::string& out) {
    std::ifstream f(config_path);
    if (!f) throw DataError("cannot open config: " + config_path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw UsageError("gen: config parse error: " + std::string(e.what()));
    }

    Trace trace;
    if (j.contains("classes")) {
        // multi-class traffic: each class gets a disjoint key range
        uint64_t offset = 0;
        for (const json& cj : j.at("classes")) {
            SyntheticConfig cfg = parse_synth_config(cj);
            Trace part = offset_keys(generate_synthetic(cfg), offset);
            trace = trace.empty() ? std::move(part) : merge_traces(trace, part);
            offset += uint64_t{1} << 32;
        }
        if (trace.empty()) throw UsageError("gen: empty class list");
    } else {
        trace = generate_synthetic(parse_synth_config(j));
    }

    std::ostringstream text;
    write_trace(trace, text);
    if (ends_with(out, ".gz"))
        write_gzip(out, text.str());
    else
        write_output(out, text.str());
    return 0;
}

int cmd_simulate(const std::string& trace_path, const std::string& policy,
                 uint64_t capacity, std::optional<uint64_t> warmup,
                 const WindowFlags& wf, bool timing, const std::string& out) {
    Trace trace = load_trace(trace_path);
    SimOptions opts;
    opts.warmup = warmup;
    opts.window = wf.to_config();
    opts.timing = timing;
    SimReport rep = run_sim(trace, policy, capacity, opts);
    if (ends_with(out, ".csv"))
        write_output(out, report_to_csv(rep));
    else
        write_output(out, report_to_json(rep).dump(2) + "\n");
    return 0;
}

int cmd_compare(const std::string& trace_path, const std::string& policies_csv,
                const std::string& capacities_csv,
                std::optional<uint64_t> warmup, const WindowFlags& wf,
                bool timing, const std::string& out) {
    std::vector<std::string> policies;
    std::stringstream ps(policies_csv);
    std::string tok;
    while (std::getline(ps, tok, ','))
        if (!tok.empty()) policies.push_back(tok);
    std::vector<uint64_t> capacities;
    std::stringstream cs(capacities_csv);
    while (std::getline(cs, tok, ',')) {
        if (tok.empty()) continue;
        try {
            capacities.push_back(std::stoull(tok));
        } catch (const std::exception&) {
            throw UsageError("compare: bad capacity '" + tok + "'");
        }
    }

    Trace trace = load_trace(trace_path);
    SimOptions opts;
    opts.warmup = warmup;
    opts.window = wf.to_config();
    opts.timing = timing;
    ComparisonReport rep = compare(trace, policies, capacities, opts);
    if (ends_with(out, ".csv"))
        write_output(out, comparison_to_csv(rep));
    else
        write_output(out, comparison_to_json(rep).dump(2) + "\n");
    return 0;
}

int cmd_bound(const std::string& trace_path, const std::string& mode_name,
              double capacity, const std::string& hazard_mode,
              double bandwidth_scale, const std::string& out) {
    Trace trace = load_trace(trace_path);
    if (trace.empty()) throw DataError("bound: empty trace");
    HroMode mode = mode_name == "hre" ? HroMode::hr_e : HroMode::hr_fc;

    std::span<const Request> window(trace.requests);
    SamplePlan plan = full_sample(window);
    HazardEstimationConfig hcfg;
    hcfg.mode =
        hazard_mode == "poisson" ? HazardMode::poisson : HazardMode::kernel;
    hcfg.bandwidth_scale = bandwidth_scale;
    std::unique_ptr<HazardSource> hazards =
        estimate_window_hazards(window, plan.sampled_keys, hcfg);
    HroBound bound = hro_upper_bound(trace, capacity, *hazards, mode);

    if (ends_with(out, ".csv")) {
        char buf[160];
        snprintf(buf, sizeof(buf),
                 "mode,capacity,hit_probability,byte_hit_probability\n"
                 "%s,%.17g,%.6g,%.6g\n",
                 mode_name.c_str(), capacity, bound.hit_probability,
                 bound.byte_hit_probability);
        write_output(out, buf);
        return 0;
    }
    json j;
    j["mode"] = mode_name;
    j["capacity"] = capacity;
    j["hit_probability"] = round6(bound.hit_probability);
    j["byte_hit_probability"] = round6(bound.byte_hit_probability);
    write_output(out, j.dump(2) + "\n");
    return 0;
}

int cmd_label_dump(const std::string& trace_path, uint64_t capacity,
                   const WindowFlags& wf, const std::string& out) {
    Trace trace = load_trace(trace_path);
    if (trace.empty()) throw DataError("label-dump: empty trace");
    WindowConfig cfg = wf.to_config();

    std::ostringstream text;
    auto dump_window = [&](size_t begin, size_t end, uint64_t window_index) {
        std::span<const Request> window(trace.requests.data() + begin,
                                        end - begin);
        SamplePlan plan = calibrate_sampling(window, cfg.op_budget,
                                             mix_seed(cfg.seed, window_index));
        HazardEstimationConfig hcfg{cfg.hazard_mode, cfg.bandwidth_scale};
        auto hazards = estimate_window_hazards(window, plan.sampled_keys, hcfg);
        auto marks = reconstruct_hro(window, plan, *hazards,
                                     static_cast<double>(capacity),
                                     HroMode::hr_fc);
        auto labels = derive_labels(window, marks, cfg.look_back);
        for (const HroLabel& l : labels) {
            json j;
            j["index"] = begin + l.request_index;  // global request index
            j["key"] = l.key;
            j["hro_hit"] = l.hro_hit;
            j["hit_fraction"] = round6(l.hit_fraction);
            j["cache_friendly"] = l.cache_friendly;
            text << j.dump() << '\n';
        }
    };

    // same closing rule as the live policy; a trace without a single full
    // window is treated as one window so small inputs still produce labels
    size_t begin = 0;
    uint64_t window_index = 0;
    std::unordered_map<uint64_t, bool> seen;
    uint64_t unique_bytes = 0;
    for (size_t i = 0; i < trace.size(); ++i) {
        if (seen.emplace(trace[i].key, true).second)
            unique_bytes += trace[i].size;
        if (static_cast<double>(unique_bytes) >=
            cfg.multiplier * static_cast<double>(capacity)) {
            dump_window(begin, i + 1, window_index++);
            begin = i + 1;
            seen.clear();
            unique_bytes = 0;
        }
    }
    if (window_index == 0) dump_window(0, trace.size(), 0);

    write_output(out, text.str());
    return 0;
}

int cmd_train(const std::string& data_path, const GbdtParams& params,
              const std::string& out) {
    std::ifstream f(data_path);
    if (!f) throw DataError("cannot open training data: " + data_path);
    std::vector<TrainingRow> rows = read_training_csv(f);
    GbdtModel model = train_gbdt(rows, params);
    write_output(out, model.to_json().dump(2) + "\n");
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& data_path,
                const std::string& out) {
    GbdtModel model = GbdtModel::load(model_path);
    std::ifstream f(data_path);
    if (!f) throw DataError("cannot open feature data: " + data_path);
    std::vector<FeatureVector> xs = read_feature_csv(f);
    std::vector<double> probs = model.predict_batch(xs);

    std::ostringstream text;
    char buf[40];
    for (double p : probs) {
        snprintf(buf, sizeof(buf), "%.17g", p);
        text << buf << '\n';
    }
    write_output(out, text.str());
    return 0;
}

int cmd_estimate_hazard(const std::string& trace_path, uint64_t key,
                        double bandwidth_scale, const std::string& at_csv,
                        const std::string& out) {
    Trace trace = load_trace(trace_path);
    InterRequestSample sample = collect_durations(trace.requests, key);
    if (sample.durations.empty())
        throw DataError("estimate-hazard: key " + std::to_string(key) +
                        " has fewer than 2 requests");
    double bw = select_bandwidth(sample.durations, bandwidth_scale);
    KernelHazardEstimator est(nelson_aalen(sample.durations), bw);

    json j;
    j["key"] = key;
    j["n_durations"] = sample.durations.size();
    j["bandwidth"] = bw;
    json events = json::array();
    for (const auto& e : est.increments().events)
        events.push_back(
            {{"t", e.t}, {"d", e.d}, {"n", e.n}, {"delta_h", e.delta_h}});
    j["events"] = events;
    if (!at_csv.empty()) {
        json evals = json::array();
        std::stringstream ss(at_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            double t = std::stod(tok);
            evals.push_back({{"t", t}, {"rate", est(t)}});
        }
        j["evaluations"] = evals;
    }
    write_output(out, j.dump(2) + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hrc: trace-driven cache simulation with hazard-rate-informed "
                 "eviction"};
    app.require_subcommand(1);

    // stats
    std::string st_trace, st_out;
    bool st_lenient = false;
    auto* stats = app.add_subcommand("stats", "summarize a trace");
    stats->add_option("trace", st_trace, "trace file (gzip ok, - for stdin)")
        ->required();
    stats->add_flag("--lenient", st_lenient,
                    "keep first-seen size on conflicts instead of failing");
    stats->add_option("-o,--output", st_out, "output path (.csv for csv)");

    // gen
    std::string gen_config, gen_out;
    auto* gen = app.add_subcommand("gen", "generate a synthetic trace");
    gen->add_option("config", gen_config, "generator config json")->required();
    gen->add_option("-o,--output", gen_out, "trace output (.gz to compress)")
        ->required();

    // simulate
    std::string sim_trace, sim_policy, sim_out;
    uint64_t sim_capacity = 0;
    int64_t sim_warmup = -1;
    bool sim_timing = false;
    WindowFlags sim_wf;
    auto* sim = app.add_subcommand("simulate", "replay one policy over a trace");
    sim->add_option("--trace", sim_trace, "trace file")->required();
    sim->add_option("--policy", sim_policy,
                    "lru | lruk | s4lru | lfuda | belady | hrcache")
        ->required();
    sim->add_option("--capacity", sim_capacity, "cache capacity in bytes")
        ->required();
    sim->add_option("--warmup", sim_warmup,
                    "measure only after this many requests (default: hrcache's "
                    "first trained window, 0 for baselines)");
    sim->add_flag("--timing", sim_timing, "record wall time in the report");
    sim->add_option("-o,--output", sim_out, "report path (.csv for csv)");
    sim_wf.attach(sim);

    // compare
    std::string cmp_trace, cmp_policies, cmp_capacities, cmp_out;
    int64_t cmp_warmup = -1;
    bool cmp_timing = false;
    WindowFlags cmp_wf;
    auto* cmp = app.add_subcommand(
        "compare", "replay several policies and capacities over one trace");
    cmp->add_option("--trace", cmp_trace, "trace file")->required();
    cmp->add_option("--policies", cmp_policies, "comma list, must include lru")
        ->required();
    cmp->add_option("--capacities", cmp_capacities, "comma list of byte sizes")
        ->required();
    cmp->add_option("--warmup", cmp_warmup, "explicit shared warmup boundary");
    cmp->add_flag("--timing", cmp_timing, "record wall times");
    cmp->add_option("-o,--output", cmp_out, "report path (.csv for csv)");
    cmp_wf.attach(cmp);

    // bound
    std::string bnd_trace, bnd_mode = "hrfc", bnd_hazard = "kernel", bnd_out;
    double bnd_capacity = 0, bnd_bw = 1.0;
    auto* bnd = app.add_subcommand(
        "bound", "hazard-ordered theoretical hit ratio upper bound");
    bnd->add_option("--trace", bnd_trace, "trace file")->required();
    bnd->add_option("--mode", bnd_mode, "hre (slots) or hrfc (bytes)")
        ->check(CLI::IsMember({"hre", "hrfc"}));
    bnd->add_option("--capacity", bnd_capacity,
                    "object slots for hre, bytes for hrfc")
        ->required();
    bnd->add_option("--hazard-mode", bnd_hazard, "kernel or poisson")
        ->check(CLI::IsMember({"kernel", "poisson"}));
    bnd->add_option("--bandwidth-scale", bnd_bw, "kernel bandwidth scale");
    bnd->add_option("-o,--output", bnd_out, "output path (.csv for csv)");

    // label-dump
    std::string lbl_trace, lbl_out;
    uint64_t lbl_capacity = 0;
    WindowFlags lbl_wf;
    auto* lbl = app.add_subcommand(
        "label-dump", "emit oracle labels per window as json lines");
    lbl->add_option("--trace", lbl_trace, "trace file")->required();
    lbl->add_option("--capacity", lbl_capacity, "cache capacity in bytes")
        ->required();
    lbl->add_option("-o,--output", lbl_out, "output path");
    lbl_wf.attach(lbl);

    // train
    std::string trn_data, trn_out;
    GbdtParams trn_params;
    auto* trn = app.add_subcommand("train", "train a classifier on a label csv");
    trn->add_option("--data", trn_data, "training csv (d1..d32,decayed_freq,size,label)")
        ->required();
    trn->add_option("-o,--output", trn_out, "model json path")->required();
    trn->add_option("--learning-rate", trn_params.learning_rate, "");
    trn->add_option("--max-depth", trn_params.max_depth, "");
    trn->add_option("--n-trees", trn_params.n_trees, "");
    trn->add_option("--max-bins", trn_params.max_bins, "");
    trn->add_option("--min-samples-leaf", trn_params.min_samples_leaf, "");
    trn->add_option("--l2-leaf-reg", trn_params.l2_leaf_reg, "");

    // predict
    std::string prd_model, prd_data, prd_out;
    auto* prd = app.add_subcommand(
        "predict", "probabilities for rows of a feature csv, one per line");
    prd->add_option("--model", prd_model, "model json")->required();
    prd->add_option("--data", prd_data,
                    "feature csv (trailing label column ignored)")
        ->required();
    prd->add_option("-o,--output", prd_out, "output path");

    // estimate-hazard
    std::string eh_trace, eh_at, eh_out;
    uint64_t eh_key = 0;
    double eh_bw = 1.0;
    auto* eh = app.add_subcommand("estimate-hazard",
                                  "dump one key's hazard estimator");
    eh->add_option("--trace", eh_trace, "trace file")->required();
    eh->add_option("--key", eh_key, "object key")->required();
    eh->add_option("--bandwidth-scale", eh_bw, "kernel bandwidth scale");
    eh->add_option("--at", eh_at, "comma list of ages to evaluate");
    eh->add_option("-o,--output", eh_out, "output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*stats) return cmd_stats(st_trace, st_lenient, st_out);
        if (*gen) return cmd_gen(gen_config, gen_out);
        if (*sim)
            return cmd_simulate(
                sim_trace, sim_policy, sim_capacity,
                sim_warmup < 0 ? std::nullopt
                               : std::optional<uint64_t>(sim_warmup),
                sim_wf, sim_timing, sim_out);
        if (*cmp)
            return cmd_compare(
                cmp_trace, cmp_policies, cmp_capacities,
                cmp_warmup < 0 ? std::nullopt
                               : std::optional<uint64_t>(cmp_warmup),
                cmp_wf, cmp_timing, cmp_out);
        if (*bnd)
            return cmd_bound(bnd_trace, bnd_mode, bnd_capacity, bnd_hazard,
                             bnd_bw, bnd_out);
        if (*lbl) return cmd_label_dump(lbl_trace, lbl_capacity, lbl_wf, lbl_out);
        if (*trn) return cmd_train(trn_data, trn_params, trn_out);
        if (*prd) return cmd_predict(prd_model, prd_data, prd_out);
        if (*eh)
            return cmd_estimate_hazard(eh_trace, eh_key, eh_bw, eh_at, eh_out);
    } catch (const hrcache::UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const hrcache::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
