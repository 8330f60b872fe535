#pragma once

// Evaluation metrics. Depth: abs-rel, sq-rel, rms, log10-rms and the delta
// accuracies at 1.25, 1.25^2, 1.25^3 (strict inequality). Normals: mean and
// median angle in degrees (lower-middle median for even counts) and the
// strict fractions under 11.25, 22.5 and 30 degrees.
//
// Accumulators pool pixels over a whole dataset; the single-pair functions
// are the same code path applied to one pair.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "transdepth/errors.hpp"

namespace td {

struct MetricsReport {
    std::string task;  // "depth" | "normals"
    // depth fields
    double abs_rel = 0.0, sq_rel = 0.0, rms = 0.0, log10_rms = 0.0;
    double delta1 = 0.0, delta2 = 0.0, delta3 = 0.0;
    // normals fields
    double mean_deg = 0.0, median_deg = 0.0, pct_11_25 = 0.0, pct_22_5 = 0.0, pct_30 = 0.0;
    int64_t n_pixels = 0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["task"] = task;
        if (task == "depth") {
            j["abs_rel"] = abs_rel;
            j["sq_rel"] = sq_rel;
            j["rms"] = rms;
            j["log10_rms"] = log10_rms;
            j["delta1"] = delta1;
            j["delta2"] = delta2;
            j["delta3"] = delta3;
        } else {
            j["mean_deg"] = mean_deg;
            j["median_deg"] = median_deg;
            j["pct_11_25"] = pct_11_25;
            j["pct_22_5"] = pct_22_5;
            j["pct_30"] = pct_30;
        }
        j["n_pixels"] = n_pixels;
        return j;
    }
};

class DepthMetricAccumulator {
public:
    // pred/gt are meters, mask 0/1; all length n.
    void add(const double* pred, const double* gt, const double* mask, int64_t n) {
        for (int64_t i = 0; i < n; ++i) {
            if (mask && mask[i] == 0.0) continue;
            const double p = pred[i], g = gt[i];
            if (p <= 0.0 || g <= 0.0) throw ValueError("depth metrics: non-positive depth at a valid pixel");
            const double diff = p - g;
            sum_abs_rel_ += std::abs(diff) / g;
            sum_sq_rel_ += diff * diff / g;
            sum_sq_ += diff * diff;
            const double dl = std::log10(p) - std::log10(g);
            sum_sq_log10_ += dl * dl;
            const double ratio = std::max(p / g, g / p);
            if (ratio < 1.25) ++d1_;
            if (ratio < 1.25 * 1.25) ++d2_;
            if (ratio < 1.25 * 1.25 * 1.25) ++d3_;
            ++count_;
        }
    }

    int64_t count() const { return count_; }

    MetricsReport finish() const {
        if (count_ < 1) throw ValueError("depth metrics: no valid pixels");
        MetricsReport r;
        r.task = "depth";
        const double k = static_cast<double>(count_);
        r.abs_rel = sum_abs_rel_ / k;
        r.sq_rel = sum_sq_rel_ / k;
        r.rms = std::sqrt(sum_sq_ / k);
        r.log10_rms = std::sqrt(sum_sq_log10_ / k);
        r.delta1 = static_cast<double>(d1_) / k;
        r.delta2 = static_cast<double>(d2_) / k;
        r.delta3 = static_cast<double>(d3_) / k;
        r.n_pixels = count_;
        return r;
    }

    void merge(const DepthMetricAccumulator& o) {
        sum_abs_rel_ += o.sum_abs_rel_;
        sum_sq_rel_ += o.sum_sq_rel_;
        sum_sq_ += o.sum_sq_;
        sum_sq_log10_ += o.sum_sq_log10_;
        d1_ += o.d1_;
        d2_ += o.d2_;
        d3_ += o.d3_;
        count_ += o.count_;
    }

private:
    double sum_abs_rel_ = 0.0, sum_sq_rel_ = 0.0, sum_sq_ = 0.0, sum_sq_log10_ = 0.0;
    int64_t d1_ = 0, d2_ = 0, d3_ = 0, count_ = 0;
};

class NormalMetricAccumulator {
public:
    // pred/gt are [3, n] channel-planar unit fields, mask length n.
    void add_planar(const double* pred, const double* gt, const double* mask, int64_t n) {
        for (int64_t i = 0; i < n; ++i) {
            if (mask && mask[i] == 0.0) continue;
            double dot = 0.0;
            for (int c = 0; c < 3; ++c) dot += pred[c * n + i] * gt[c * n + i];
            dot = std::min(1.0 - 1e-7, std::max(-(1.0 - 1e-7), dot));
            angles_deg_.push_back(std::acos(dot) * (180.0 / 3.14159265358979323846));
        }
    }

    void add_angle_deg(double a) { angles_deg_.push_back(a); }

    int64_t count() const { return static_cast<int64_t>(angles_deg_.size()); }

    MetricsReport finish() const {
        if (angles_deg_.empty()) throw ValueError("normal metrics: no valid pixels");
        MetricsReport r;
        r.task = "normals";
        std::vector<double> a = angles_deg_;
        std::sort(a.begin(), a.end());
        double sum = 0.0;
        int64_t c1 = 0, c2 = 0, c3 = 0;
        for (double v : a) {
            sum += v;
            if (v < 11.25) ++c1;
            if (v < 22.5) ++c2;
            if (v < 30.0) ++c3;
        }
        const double k = static_cast<double>(a.size());
        r.mean_deg = sum / k;
        r.median_deg = a[(a.size() - 1) / 2];  // lower-middle for even counts
        r.pct_11_25 = static_cast<double>(c1) / k;
        r.pct_22_5 = static_cast<double>(c2) / k;
        r.pct_30 = static_cast<double>(c3) / k;
        r.n_pixels = static_cast<int64_t>(a.size());
        return r;
    }

    void merge(const NormalMetricAccumulator& o) {
        angles_deg_.insert(angles_deg_.end(), o.angles_deg_.begin(), o.angles_deg_.end());
    }

private:
    std::vector<double> angles_deg_;
};

inline MetricsReport depth_metrics(const std::vector<double>& pred, const std::vector<double>& gt,
                                   const std::vector<double>* mask = nullptr) {
    if (pred.size() != gt.size() || (mask && mask->size() != gt.size()))
        throw ShapeError("depth metrics: length mismatch");
    DepthMetricAccumulator acc;
    acc.add(pred.data(), gt.data(), mask ? mask->data() : nullptr, static_cast<int64_t>(pred.size()));
    return acc.finish();
}

// pred/gt flattened [3, n] planar.
inline MetricsReport normal_metrics(const std::vector<double>& pred, const std::vector<double>& gt,
                                    const std::vector<double>* mask = nullptr) {
    if (pred.size() != gt.size() || pred.size() % 3 != 0) throw ShapeError("normal metrics: bad field length");
    const int64_t n = static_cast<int64_t>(pred.size() / 3);
    if (mask && static_cast<int64_t>(mask->size()) != n) throw ShapeError("normal metrics: mask length mismatch");
    NormalMetricAccumulator acc;
    acc.add_planar(pred.data(), gt.data(), mask ? mask->data() : nullptr, n);
    return acc.finish();
}

}  // namespace td
