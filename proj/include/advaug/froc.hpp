#pragma once

#include <array>
#include <string>
#include <vector>

#include "advaug/heads.hpp"
#include "advaug/rng.hpp"
#include "advaug/tensor.hpp"

namespace advaug {

struct Candidate {
    std::string scan_id;
    double x = 0.0; // column
    double y = 0.0; // row
    double score = 0.0;
};

struct GroundTruth {
    std::string scan_id;
    double x = 0.0;
    double y = 0.0;
    double radius = 0.0;
    bool relevant = true; // irrelevant findings are excluded from the metrics
};

enum class MatchLabel : std::uint8_t { tp, fp, ignored };

struct MatchResult {
    std::vector<MatchLabel> labels; // aligned with the candidate input order
    std::vector<long> matched_gt;   // claimed ground-truth index or -1
    std::size_t total_relevant = 0;
};

struct FrocPoint {
    double fp_per_scan = 0.0;
    double sensitivity = 0.0;
};

struct FrocCurve {
    std::vector<FrocPoint> points; // ordered by increasing fp_per_scan
    std::size_t scan_count = 0;
    std::size_t total_relevant = 0;
};

inline constexpr std::array<double, 7> kCpmOperatingPoints{0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0};

struct CpmScore {
    std::array<double, 7> sensitivities{};
    double mean = 0.0;
};

// Greedy descending-score peak selection on a [h,w] heatmap with values in
// [0,1]; peaks within min_distance of an accepted peak are suppressed.
// Ties break on the flat cell index.
std::vector<Candidate> nms(const Tensor& heatmap, double min_distance, std::size_t max_candidates,
                           const std::string& scan_id = "scan");

// Candidate-to-ground-truth assignment: a candidate is a TP iff it lies
// inside the radius of a relevant GT; each GT is claimed once by its
// highest-score candidate; later hits on a claimed GT are ignored, as are
// hits on irrelevant findings. Exact duplicates are rejected.
MatchResult match(const std::vector<Candidate>& candidates, const std::vector<GroundTruth>& gts);

// Threshold sweep over the distinct candidate scores. Requires at least one
// relevant ground truth.
FrocCurve froc(const std::vector<Candidate>& candidates, const MatchResult& matches,
               std::size_t scan_count);

// Step-function evaluation of the curve at the 7 operating points.
CpmScore cpm(const FrocCurve& curve);

struct StressSummary {
    double mean = 0.0;
    double stddev = 0.0; // population
    std::size_t n = 0;
};

StressSummary stress_summary(const std::vector<double>& confidences);
StressSummary stress_summary(const Classifier& model, const std::vector<Tensor>& patches);

struct BootstrapCi {
    double lo = 0.0;
    double hi = 0.0;
    int resamples = 0;
};

// Scan-level bootstrap of the CPM: scans resampled with replacement,
// percentile interval over the resampled scores.
BootstrapCi cpm_bootstrap_ci(const std::vector<Candidate>& candidates,
                             const std::vector<GroundTruth>& gts,
                             const std::vector<std::string>& scan_ids, int resamples, Rng& rng);

// CSV I/O: candidates.csv (scan_id,x,y,score), groundtruth.csv
// (scan_id,x,y,radius,relevant).
void save_candidates_csv(const std::string& path, const std::vector<Candidate>& candidates);
std::vector<Candidate> load_candidates_csv(const std::string& path);
void save_groundtruth_csv(const std::string& path, const std::vector<GroundTruth>& gts);
std::vector<GroundTruth> load_groundtruth_csv(const std::string& path);

} // namespace advaug
