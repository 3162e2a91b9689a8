#include "advaug/froc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "advaug/errors.hpp"

namespace advaug {

std::vector<Candidate> nms(const Tensor& heatmap, double min_distance, std::size_t max_candidates,
                           const std::string& scan_id) {
    if (heatmap.rank() != 2) {
        throw std::invalid_argument("nms: heatmap must be [h,w], got " + format_shape(heatmap.shape()));
    }
    if (min_distance < 0.0) throw std::invalid_argument("nms: min distance must be >= 0");
    std::size_t w = heatmap.cols();
    for (std::size_t i = 0; i < heatmap.size(); ++i) {
        if (heatmap[i] < 0.0 || heatmap[i] > 1.0) {
            throw std::invalid_argument("nms: heatmap values must lie in [0,1]");
        }
    }
    // peaks = cells not below any 8-neighbour
    std::size_t h = heatmap.rows();
    std::vector<std::size_t> order;
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            double v = heatmap[r * w + c];
            bool peak = true;
            for (int dr = -1; dr <= 1 && peak; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    if (dr == 0 && dc == 0) continue;
                    long nr = static_cast<long>(r) + dr, nc = static_cast<long>(c) + dc;
                    if (nr < 0 || nc < 0 || nr >= static_cast<long>(h) || nc >= static_cast<long>(w)) {
                        continue;
                    }
                    if (heatmap[static_cast<std::size_t>(nr) * w + static_cast<std::size_t>(nc)] > v) {
                        peak = false;
                        break;
                    }
                }
            }
            if (peak) order.push_back(r * w + c);
        }
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (heatmap[a] != heatmap[b]) return heatmap[a] > heatmap[b];
        return a < b;
    });

    std::vector<Candidate> out;
    double min_d2 = min_distance * min_distance;
    for (std::size_t flat : order) {
        if (out.size() >= max_candidates) break;
        double cx = static_cast<double>(flat % w);
        double cy = static_cast<double>(flat / w);
        bool suppressed = false;
        for (const auto& kept : out) {
            double dx = cx - kept.x, dy = cy - kept.y;
            if (dx * dx + dy * dy < min_d2) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) out.push_back({scan_id, cx, cy, heatmap[flat]});
    }
    return out;
}

MatchResult match(const std::vector<Candidate>& candidates, const std::vector<GroundTruth>& gts) {
    for (const auto& c : candidates) {
        if (!std::isfinite(c.score) || c.score < 0.0 || c.score > 1.0) {
            throw std::invalid_argument("match: candidate score must be finite in [0,1]");
        }
    }
    for (const auto& g : gts) {
        if (!(g.radius > 0.0)) throw std::invalid_argument("match: ground-truth radius must be > 0");
    }
    // exact duplicates are ambiguous under the deterministic tie rule
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        for (std::size_t j = i + 1; j < candidates.size(); ++j) {
            if (candidates[i].scan_id == candidates[j].scan_id && candidates[i].x == candidates[j].x &&
                candidates[i].y == candidates[j].y && candidates[i].score == candidates[j].score) {
                throw std::invalid_argument("match: duplicate candidate (scan " + candidates[i].scan_id +
                                            ", index " + std::to_string(j) + ")");
            }
        }
    }

    MatchResult result;
    result.labels.assign(candidates.size(), MatchLabel::fp);
    result.matched_gt.assign(candidates.size(), -1);
    for (const auto& g : gts) {
        if (g.relevant) ++result.total_relevant;
    }

    std::vector<std::size_t> order(candidates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (candidates[a].score != candidates[b].score) return candidates[a].score > candidates[b].score;
        return a < b;
    });

    std::vector<char> claimed(gts.size(), 0);
    for (std::size_t ci : order) {
        const Candidate& c = candidates[ci];
        long best = -1;
        double best_d = 0.0;
        bool hit_claimed_relevant = false;
        bool hit_irrelevant = false;
        for (std::size_t gi = 0; gi < gts.size(); ++gi) {
            const GroundTruth& g = gts[gi];
            if (g.scan_id != c.scan_id) continue;
            double d = std::hypot(c.x - g.x, c.y - g.y);
            if (d >= g.radius) continue;
            if (!g.relevant) {
                hit_irrelevant = true;
                continue;
            }
            if (claimed[gi]) {
                hit_claimed_relevant = true;
                continue;
            }
            if (best < 0 || d < best_d) {
                best = static_cast<long>(gi);
                best_d = d;
            }
        }
        if (best >= 0) {
            claimed[static_cast<std::size_t>(best)] = 1;
            result.labels[ci] = MatchLabel::tp;
            result.matched_gt[ci] = best;
        } else if (hit_claimed_relevant || hit_irrelevant) {
            result.labels[ci] = MatchLabel::ignored;
        } // else stays fp
    }
    return result;
}

FrocCurve froc(const std::vector<Candidate>& candidates, const MatchResult& matches,
               std::size_t scan_count) {
    if (scan_count < 1) throw std::invalid_argument("froc: scan count must be >= 1");
    if (matches.labels.size() != candidates.size()) {
        throw std::invalid_argument("froc: match results do not align with candidates");
    }
    if (matches.total_relevant == 0) {
        throw std::invalid_argument("froc: no relevant ground truth to measure sensitivity against");
    }

    std::vector<double> thresholds;
    thresholds.reserve(candidates.size());
    for (const auto& c : candidates) thresholds.push_back(c.score);
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    FrocCurve curve;
    curve.scan_count = scan_count;
    curve.total_relevant = matches.total_relevant;
    for (double tau : thresholds) {
        std::size_t tp = 0, fp = 0;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            if (candidates[i].score < tau) continue;
            if (matches.labels[i] == MatchLabel::tp) ++tp;
            if (matches.labels[i] == MatchLabel::fp) ++fp;
        }
        curve.points.push_back({static_cast<double>(fp) / static_cast<double>(scan_count),
                                static_cast<double>(tp) / static_cast<double>(matches.total_relevant)});
    }
    return curve;
}

CpmScore cpm(const FrocCurve& curve) {
    CpmScore score;
    double acc = 0.0;
    for (std::size_t i = 0; i < kCpmOperatingPoints.size(); ++i) {
        double q = kCpmOperatingPoints[i];
        double s = 0.0;
        for (const auto& p : curve.points) {
            if (p.fp_per_scan <= q) s = std::max(s, p.sensitivity);
        }
        score.sensitivities[i] = s;
        acc += s;
    }
    score.mean = acc / static_cast<double>(kCpmOperatingPoints.size());
    return score;
}

StressSummary stress_summary(const std::vector<double>& confidences) {
    if (confidences.empty()) throw std::invalid_argument("stress_summary: empty set");
    StressSummary s;
    s.n = confidences.size();
    for (double c : confidences) s.mean += c;
    s.mean /= static_cast<double>(s.n);
    auto [lo, hi] = std::minmax_element(confidences.begin(), confidences.end());
    if (*lo == *hi) {
        s.mean = *lo; // constant responses: exact zero spread
        return s;
    }
    double var = 0.0;
    for (double c : confidences) var += (c - s.mean) * (c - s.mean);
    s.stddev = std::sqrt(var / static_cast<double>(s.n));
    return s;
}

StressSummary stress_summary(const Classifier& model, const std::vector<Tensor>& patches) {
    std::vector<double> conf;
    conf.reserve(patches.size());
    for (const auto& p : patches) conf.push_back(model.confidence(p));
    return stress_summary(conf);
}

BootstrapCi cpm_bootstrap_ci(const std::vector<Candidate>& candidates,
                             const std::vector<GroundTruth>& gts,
                             const std::vector<std::string>& scan_ids, int resamples, Rng& rng) {
    if (resamples < 1) throw std::invalid_argument("bootstrap: resamples must be >= 1");
    if (scan_ids.empty()) throw std::invalid_argument("bootstrap: no scans");

    std::unordered_map<std::string, std::vector<std::size_t>> cands_by_scan, gts_by_scan;
    for (std::size_t i = 0; i < candidates.size(); ++i) cands_by_scan[candidates[i].scan_id].push_back(i);
    for (std::size_t i = 0; i < gts.size(); ++i) gts_by_scan[gts[i].scan_id].push_back(i);

    std::vector<double> scores;
    scores.reserve(static_cast<std::size_t>(resamples));
    for (int r = 0; r < resamples; ++r) {
        std::vector<Candidate> cs;
        std::vector<GroundTruth> gs;
        for (std::size_t k = 0; k < scan_ids.size(); ++k) {
            const std::string& scan = scan_ids[rng.below(scan_ids.size())];
            std::string alias = scan + "#" + std::to_string(k);
            if (auto it = cands_by_scan.find(scan); it != cands_by_scan.end()) {
                for (std::size_t ci : it->second) {
                    Candidate c = candidates[ci];
                    c.scan_id = alias;
                    cs.push_back(std::move(c));
                }
            }
            if (auto it = gts_by_scan.find(scan); it != gts_by_scan.end()) {
                for (std::size_t gi : it->second) {
                    GroundTruth g = gts[gi];
                    g.scan_id = alias;
                    gs.push_back(std::move(g));
                }
            }
        }
        bool any_relevant = std::any_of(gs.begin(), gs.end(), [](const GroundTruth& g) { return g.relevant; });
        if (!any_relevant) continue; // CPM undefined on this resample
        MatchResult m = match(cs, gs);
        scores.push_back(cpm(froc(cs, m, scan_ids.size())).mean);
    }
    if (scores.empty()) throw NumericalError("bootstrap: every resample lacked relevant ground truth");
    std::sort(scores.begin(), scores.end());
    auto percentile = [&](double q) {
        double idx = q * static_cast<double>(scores.size() - 1);
        std::size_t lo = static_cast<std::size_t>(idx);
        std::size_t hi = std::min(lo + 1, scores.size() - 1);
        double frac = idx - static_cast<double>(lo);
        return scores[lo] * (1.0 - frac) + scores[hi] * frac;
    };
    return {percentile(0.025), percentile(0.975), resamples};
}

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

void save_candidates_csv(const std::string& path, const std::vector<Candidate>& candidates) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "scan_id,x,y,score\n";
    for (const auto& c : candidates) {
        out << c.scan_id << "," << fmt_double(c.x) << "," << fmt_double(c.y) << ","
            << fmt_double(c.score) << "\n";
    }
    if (!out.good()) throw IoError("write failed: " + path);
}

std::vector<Candidate> load_candidates_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "scan_id,x,y,score") {
        throw ConfigError(path + ": expected header scan_id,x,y,score");
    }
    std::vector<Candidate> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string scan, xs, ys, score;
        if (!std::getline(ss, scan, ',') || !std::getline(ss, xs, ',') || !std::getline(ss, ys, ',') ||
            !std::getline(ss, score)) {
            throw ConfigError(path + ": malformed row at line " + std::to_string(lineno));
        }
        try {
            out.push_back({scan, std::stod(xs), std::stod(ys), std::stod(score)});
        } catch (const std::exception&) {
            throw ConfigError(path + ": malformed number at line " + std::to_string(lineno));
        }
    }
    return out;
}

void save_groundtruth_csv(const std::string& path, const std::vector<GroundTruth>& gts) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "scan_id,x,y,radius,relevant\n";
    for (const auto& g : gts) {
        out << g.scan_id << "," << fmt_double(g.x) << "," << fmt_double(g.y) << ","
            << fmt_double(g.radius) << "," << (g.relevant ? 1 : 0) << "\n";
    }
    if (!out.good()) throw IoError("write failed: " + path);
}

std::vector<GroundTruth> load_groundtruth_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "scan_id,x,y,radius,relevant") {
        throw ConfigError(path + ": expected header scan_id,x,y,radius,relevant");
    }
    std::vector<GroundTruth> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string scan, xs, ys, rs, rel;
        if (!std::getline(ss, scan, ',') || !std::getline(ss, xs, ',') || !std::getline(ss, ys, ',') ||
            !std::getline(ss, rs, ',') || !std::getline(ss, rel)) {
            throw ConfigError(path + ": malformed row at line " + std::to_string(lineno));
        }
        try {
            out.push_back({scan, std::stod(xs), std::stod(ys), std::stod(rs), std::stoi(rel) != 0});
        } catch (const std::exception&) {
            throw ConfigError(path + ": malformed number at line " + std::to_string(lineno));
        }
    }
    return out;
}

} // namespace advaug
