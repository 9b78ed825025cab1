#include "msmrf/evaluate.hpp"

#include <algorithm>
#include <cmath>

#include "msmrf/errors.hpp"

namespace msmrf {

std::optional<double> spatial_coherence(const StateGrid& z, ScaleId scale,
                                        const MultiScaleLattice& lat) {
    double sum = 0.0;
    long cells = 0;
    for (int s = 0; s < z.locations; ++s) {
        const auto& nb = lat.neighbors(scale.l, s);
        if (nb.empty()) continue;
        for (int t = 0; t < z.times; ++t) {
            const int k = z.at(s, t);
            if (k < 1) continue;
            int present = 0, same = 0;
            for (int s2 : nb) {
                const int k2 = z.at(s2, t);
                if (k2 < 1) continue;
                ++present;
                if (k2 == k) ++same;
            }
            if (present == 0) continue;
            sum += static_cast<double>(same) / present;
            ++cells;
        }
    }
    if (cells == 0) return std::nullopt;
    return sum / cells;
}

std::optional<double> temporal_coherence(const StateGrid& z, ScaleId /*scale*/,
                                         const MultiScaleLattice& /*lat*/) {
    if (z.times < 2) return std::nullopt;
    double sum = 0.0;
    int locations = 0;
    for (int s = 0; s < z.locations; ++s) {
        int pairs = 0, matches = 0;
        for (int t = 0; t + 1 < z.times; ++t) {
            const int a = z.at(s, t), b = z.at(s, t + 1);
            if (a < 1 || b < 1) continue;
            ++pairs;
            if (a == b) ++matches;
        }
        if (pairs == 0) continue;
        sum += static_cast<double>(matches) / pairs;
        ++locations;
    }
    if (locations == 0) return std::nullopt;
    return sum / locations;
}

CoherenceReport coherence_report(const StateGrid& z, ScaleId scale,
                                 const MultiScaleLattice& lat) {
    return {scale, spatial_coherence(z, scale, lat), temporal_coherence(z, scale, lat)};
}

std::vector<SizeSummaryRow> size_summary(const std::vector<AnomalyRegion>& regions,
                                         int max_state) {
    std::vector<SizeSummaryRow> rows(max_state);
    std::vector<double> st(max_state, 0.0), sp(max_state, 0.0), tp(max_state, 0.0),
        mv(max_state, 0.0);
    for (const auto& r : regions) {
        if (r.state < 1 || r.state > max_state) continue;
        const int i = r.state - 1;
        ++rows[i].count;
        st[i] += r.st_size;
        sp[i] += r.spatial_size;
        tp[i] += r.temporal_size;
        mv[i] += r.mean_value;
    }
    for (int i = 0; i < max_state; ++i) {
        rows[i].state = i + 1;
        if (rows[i].count > 0) {
            rows[i].mean_st_size = st[i] / rows[i].count;
            rows[i].mean_spatial_size = sp[i] / rows[i].count;
            rows[i].mean_temporal_size = tp[i] / rows[i].count;
            rows[i].mean_value = mv[i] / rows[i].count;
        }
    }
    return rows;
}

namespace {

// All time indices at the finest temporal scale beneath time t of scale m.
std::vector<int> descend_times(const MultiScaleLattice& lat, int m, int t) {
    std::vector<int> cur = {t};
    for (int level = m; level > 0; --level) {
        std::vector<int> next;
        for (int tt : cur) {
            const auto& kids = lat.children_temporal(level, tt);
            next.insert(next.end(), kids.begin(), kids.end());
        }
        cur = std::move(next);
    }
    std::sort(cur.begin(), cur.end());
    return cur;
}

struct MeanAcc {
    double sum = 0.0;
    long n = 0;
    void add(double v) {
        sum += v;
        ++n;
    }
    std::optional<double> value() const {
        if (n == 0) return std::nullopt;
        return sum / n;
    }
};

}  // namespace

CrossScaleReport cross_scale_report(const StateFieldSet& z, const ObservationSet& obs,
                                    const MultiScaleLattice& lat) {
    const int L = lat.num_spatial_scales();
    const int M = lat.num_temporal_scales();
    if (L < 2 || M < 2)
        throw ShapeError("cross-scale report requires at least 2 spatial and 2 temporal scales");
    if (lat.spatial_size(L - 1) != 1)
        throw ShapeError("cross-scale report requires a single-location top spatial scale");

    const int si_ca = lat.scale_index({L - 1, M - 1});  // country-annual
    const int si_cm = lat.scale_index({L - 1, 0});      // country-monthly
    const int si_ga = lat.scale_index({0, M - 1});      // grid-annual
    const int si_gm = lat.scale_index({0, 0});          // grid-monthly
    const StateGrid& zca = z.grid(si_ca);
    const StateGrid& zcm = z.grid(si_cm);
    const StateGrid& zga = z.grid(si_ga);
    const StateGrid& zgm = z.grid(si_gm);
    const ScaleGrid& xcm = obs.grid(si_cm);
    const ScaleGrid& xga = obs.grid(si_ga);
    const ScaleGrid& xgm = obs.grid(si_gm);

    CrossScaleReport report;
    for (int k = 1; k <= 2; ++k) {
        CrossScaleRow row;
        row.state = k;

        std::vector<int> years;
        for (int y = 0; y < zca.times; ++y)
            if (zca.at(0, y) == k) years.push_back(y);
        row.n_years = static_cast<int>(years.size());

        if (!years.empty()) {
            MeanAcc count_months, coh_months, x_months;
            MeanAcc count_loc, coh_loc, x_loc;
            for (int y : years) {
                int n_months = 0;
                for (int mo : descend_times(lat, M - 1, y)) {
                    if (zcm.at(0, mo) != k) continue;
                    ++n_months;
                    if (!xcm.is_missing(0, mo)) x_months.add(xcm.at(0, mo));
                    int pairs = 0, same = 0;
                    for (int d : {-1, 1}) {
                        const int mo2 = mo + d;
                        if (mo2 < 0 || mo2 >= zcm.times) continue;
                        const int k2 = zcm.at(0, mo2);
                        if (k2 < 1) continue;
                        ++pairs;
                        if (k2 == k) ++same;
                    }
                    if (pairs > 0) coh_months.add(static_cast<double>(same) / pairs);
                }
                count_months.add(n_months);

                int n_loc = 0;
                for (int s = 0; s < zga.locations; ++s) {
                    if (zga.at(s, y) != k) continue;
                    ++n_loc;
                    if (!xga.is_missing(s, y)) x_loc.add(xga.at(s, y));
                    int present = 0, same = 0;
                    for (int s2 : lat.neighbors(0, s)) {
                        const int k2 = zga.at(s2, y);
                        if (k2 < 1) continue;
                        ++present;
                        if (k2 == k) ++same;
                    }
                    if (present > 0) coh_loc.add(static_cast<double>(same) / present);
                }
                count_loc.add(n_loc);
            }
            row.mean_count_months = count_months.value();
            row.months_coherence = coh_months.value();
            row.months_mean_x = x_months.value();
            row.mean_count_loc_annual = count_loc.value();
            row.loc_annual_coherence = coh_loc.value();
            row.loc_annual_mean_x = x_loc.value();
        }

        // Months-conditional variant: grid-monthly locations in every month
        // whose country-monthly state is k, over the whole timeline.
        std::vector<int> months;
        for (int mo = 0; mo < zcm.times; ++mo)
            if (zcm.at(0, mo) == k) months.push_back(mo);
        row.n_months = static_cast<int>(months.size());
        if (!months.empty()) {
            MeanAcc count_loc, coh_loc, x_loc;
            for (int mo : months) {
                int n_loc = 0;
                for (int s = 0; s < zgm.locations; ++s) {
                    if (zgm.at(s, mo) != k) continue;
                    ++n_loc;
                    if (!xgm.is_missing(s, mo)) x_loc.add(xgm.at(s, mo));
                    int present = 0, same = 0;
                    for (int s2 : lat.neighbors(0, s)) {
                        const int k2 = zgm.at(s2, mo);
                        if (k2 < 1) continue;
                        ++present;
                        if (k2 == k) ++same;
                    }
                    if (present > 0) coh_loc.add(static_cast<double>(same) / present);
                }
                count_loc.add(n_loc);
            }
            row.mean_count_loc_monthly = count_loc.value();
            row.loc_monthly_coherence = coh_loc.value();
            row.loc_monthly_mean_x = x_loc.value();
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::vector<LabelScore> score_against_truth(const StateGrid& pred, const StateGrid& truth) {
    if (pred.locations != truth.locations || pred.times != truth.times)
        throw ShapeError("prediction and truth grids differ in shape");

    int max_label = 0;
    for (int v : truth.z) max_label = std::max(max_label, v);
    for (int v : pred.z) max_label = std::max(max_label, v);

    std::vector<LabelScore> scores(max_label);
    for (int k = 1; k <= max_label; ++k) scores[k - 1].label = k;

    for (size_t i = 0; i < truth.z.size(); ++i) {
        const int t = truth.z[i];
        if (t == 0) continue;  // missing in truth: excluded
        const int p = pred.z[i];
        if (p == t) {
            ++scores[t - 1].tp;
        } else {
            ++scores[t - 1].fn;
            if (p >= 1) ++scores[p - 1].fp;
        }
    }
    // Labels that never occur in either grid carry no information.
    std::erase_if(scores, [](const LabelScore& s) { return s.tp + s.fp + s.fn == 0; });
    for (auto& sc : scores) {
        sc.precision = sc.tp + sc.fp > 0 ? static_cast<double>(sc.tp) / (sc.tp + sc.fp) : 0.0;
        sc.recall = sc.tp + sc.fn > 0 ? static_cast<double>(sc.tp) / (sc.tp + sc.fn) : 0.0;
        sc.f1 = sc.precision + sc.recall > 0.0
                    ? 2.0 * sc.precision * sc.recall / (sc.precision + sc.recall)
                    : 0.0;
    }
    return scores;
}

}  // namespace msmrf
