#pragma once

#include <optional>
#include <vector>

#include "garment/normal_map.hpp"

namespace garment {

// Pixel values are the stored normal components; undefined texels count as
// the zero vector.
//   L_data = sum_c sum_p |gen - gt|  /  #p,   p over texels defined in both
//   L_temp = sum_c | sum_p (gen - gt_prev) |  (absolute value of the sum,
//            taken per channel)
struct TemporalLoss {
    double data = 0.0;
    double temporal = 0.0;
    int data_pixels = 0;
};

TemporalLoss temporal_loss(const NormalMap& generated, const NormalMap& target, const NormalMap& previous_target);

// L_data of one frame only (no previous frame).
double data_loss(const NormalMap& generated, const NormalMap& target);

struct TemporalLossReport {
    struct Frame {
        int frame = 0;
        double data = 0.0;
        std::optional<double> temporal;  // absent for the first frame
    };
    std::vector<Frame> frames;
    double mean_data = 0.0;
    double mean_temporal = 0.0;  // over transitions; 0 for single frames
};

// Frame t compares generated[t] with target[t] and target[t-1].
TemporalLossReport evaluate_sequence(const std::vector<NormalMap>& generated, const std::vector<NormalMap>& target);

}  // namespace garment
