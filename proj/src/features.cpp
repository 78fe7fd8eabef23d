#include "hrcache/features.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "hrcache/errors.hpp"

namespace hrcache {

void FeatureTable::touch(const Request& r, uint64_t global_seq) {
    ObjectState& st = table_[r.key];
    if (st.count == 0) {
        st.decayed_count = 1.0;
    } else {
        double gap = static_cast<double>(global_seq - st.last_update_seq);
        st.decayed_count = st.decayed_count * std::pow(gamma_, gap) + 1.0;
    }
    st.push_time(r.time);
    st.last_update_seq = global_seq;
    st.size = r.size;
}

FeatureVector FeatureTable::build(uint64_t key, double now, uint64_t global_seq,
                                  uint64_t size_hint) const {
    FeatureVector f;
    f.fill(kMissingDelta);
    auto it = table_.find(key);
    if (it == table_.end()) {
        f[kNumDeltas] = 0.0;
        f[kNumDeltas + 1] = static_cast<double>(size_hint);
        return f;
    }
    const ObjectState& st = it->second;
    // d1 spans now..latest; dk the gap between the (k-1)th and kth most
    // recent recorded times.
    f[0] = now - st.time_back(0);
    uint32_t gaps = std::min(st.count - 1, static_cast<uint32_t>(kNumDeltas - 1));
    for (uint32_t k = 0; k < gaps; ++k)
        f[k + 1] = st.time_back(k) - st.time_back(k + 1);

    double gap = static_cast<double>(global_seq - st.last_update_seq);
    f[kNumDeltas] = st.decayed_count * std::pow(gamma_, gap);
    f[kNumDeltas + 1] = static_cast<double>(st.size);
    return f;
}

const ObjectState* FeatureTable::find(uint64_t key) const {
    auto it = table_.find(key);
    return it == table_.end() ? nullptr : &it->second;
}

void FeatureTable::evict_idle(uint64_t min_seq) {
    for (auto it = table_.begin(); it != table_.end();) {
        if (it->second.last_update_seq < min_seq)
            it = table_.erase(it);
        else
            ++it;
    }
}

void write_training_csv(std::ostream& out, const std::vector<TrainingRow>& rows) {
    for (int i = 1; i <= kNumDeltas; ++i) out << 'd' << i << ',';
    out << "decayed_freq,size,label\n";
    char buf[32];
    for (const TrainingRow& row : rows) {
        for (int i = 0; i < kFeatureCount; ++i) {
            snprintf(buf, sizeof(buf), "%.17g", row.features[i]);
            out << buf << ',';
        }
        out << row.label << '\n';
    }
}

std::vector<TrainingRow> read_training_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("training csv: empty file");

    std::vector<TrainingRow> rows;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        TrainingRow row;
        std::stringstream ss(line);
        std::string cell;
        int col = 0;
        while (std::getline(ss, cell, ',')) {
            try {
                if (col < kFeatureCount)
                    row.features[col] = std::stod(cell);
                else if (col == kFeatureCount)
                    row.label = std::stoi(cell);
                else
                    throw DataError("");
            } catch (const std::exception&) {
                throw DataError("training csv line " + std::to_string(lineno) +
                                ": bad cell '" + cell + "'");
            }
            ++col;
        }
        if (col != kFeatureCount + 1)
            throw DataError("training csv line " + std::to_string(lineno) +
                            ": expected " + std::to_string(kFeatureCount + 1) +
                            " columns, got " + std::to_string(col));
        if (row.label != 0 && row.label != 1)
            throw DataError("training csv line " + std::to_string(lineno) +
                            ": label must be 0 or 1");
        rows.push_back(row);
    }
    return rows;
}

std::vector<FeatureVector> read_feature_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("feature csv: empty file");

    std::vector<FeatureVector> rows;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        FeatureVector x;
        std::stringstream ss(line);
        std::string cell;
        int col = 0;
        while (std::getline(ss, cell, ',')) {
            if (col < kFeatureCount) {
                try {
                    x[col] = std::stod(cell);
                } catch (const std::exception&) {
                    throw DataError("feature csv line " + std::to_string(lineno) +
                                    ": bad cell '" + cell + "'");
                }
            }
            ++col;
        }
        if (col != kFeatureCount && col != kFeatureCount + 1)
            throw DataError("feature csv line " + std::to_string(lineno) +
                            ": expected " + std::to_string(kFeatureCount) +
                            " feature columns (label optional), got " +
                            std::to_string(col));
        rows.push_back(x);
    }
    return rows;
}

}  // namespace hrcache
