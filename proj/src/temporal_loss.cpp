#include "garment/temporal_loss.hpp"

#include <algorithm>
#include <cmath>
#include <vector>
#include <string>

#include "garment/errors.hpp"

namespace garment {

namespace {

void require_same_size(const NormalMap& a, const NormalMap& b) {
    if (a.width != b.width || a.height != b.height) {
        throw DataError("image sizes differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                        std::to_string(b.width) + "x" + std::to_string(b.height));
    }
}

// Sorting first makes the result a function of the multiset of values, so
// any permutation of the pixels gives the same bits.
double order_free_sum(std::vector<double>& values) {
    std::sort(values.begin(), values.end());
    double sum = 0.0, carry = 0.0;  // Neumaier compensation
    for (double v : values) {
        const double t = sum + v;
        carry += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
        sum = t;
    }
    return sum + carry;
}

}  // namespace

double data_loss(const NormalMap& generated, const NormalMap& target) {
    require_same_size(generated, target);
    double sum = 0.0;
    int count = 0;
    for (std::size_t k = 0; k < generated.normals.size(); ++k) {
        if (!generated.defined[k] || !target.defined[k]) continue;
        sum += (generated.normals[k] - target.normals[k]).cwiseAbs().sum();
        ++count;
    }
    return count > 0 ? sum / count : 0.0;
}

TemporalLoss temporal_loss(const NormalMap& generated, const NormalMap& target, const NormalMap& previous_target) {
    require_same_size(generated, target);
    require_same_size(generated, previous_target);
    TemporalLoss loss;
    loss.data = data_loss(generated, target);
    for (std::size_t k = 0; k < generated.normals.size(); ++k) {
        loss.data_pixels += generated.defined[k] && target.defined[k];
    }
    // Undefined texels already store zero.
    std::vector<double> channel(generated.normals.size());
    for (int c = 0; c < 3; ++c) {
        for (std::size_t k = 0; k < channel.size(); ++k) {
            channel[k] = generated.normals[k][c] - previous_target.normals[k][c];
        }
        loss.temporal += std::abs(order_free_sum(channel));
    }
    return loss;
}

TemporalLossReport evaluate_sequence(const std::vector<NormalMap>& generated, const std::vector<NormalMap>& target) {
    if (generated.size() != target.size()) {
        throw DataError("sequence lengths differ: " + std::to_string(generated.size()) + " generated vs " +
                        std::to_string(target.size()) + " target");
    }
    if (generated.empty()) throw DataError("empty sequence");
    TemporalLossReport report;
    double temporal_sum = 0.0;
    for (std::size_t t = 0; t < generated.size(); ++t) {
        TemporalLossReport::Frame f;
        f.frame = static_cast<int>(t);
        if (t == 0) {
            f.data = data_loss(generated[0], target[0]);
        } else {
            const TemporalLoss l = temporal_loss(generated[t], target[t], target[t - 1]);
            f.data = l.data;
            f.temporal = l.temporal;
            temporal_sum += l.temporal;
        }
        report.mean_data += f.data;
        report.frames.push_back(f);
    }
    report.mean_data /= static_cast<double>(generated.size());
    if (generated.size() > 1) report.mean_temporal = temporal_sum / static_cast<double>(generated.size() - 1);
    return report;
}

}  // namespace garment
