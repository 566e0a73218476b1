#include "carl/twin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "carl/error.hpp"

namespace carl::twin {

namespace {

constexpr double kSubcarrierHz = 15000.0;
// 12 subcarriers x 15 kHz x 1 ms, in Mbits per (bit/s/Hz).
constexpr double kPrbMbitsPerSe = 180.0e-6;
constexpr double kMinDistanceM = 1.0;

double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }

long long freq_key(double freq_mhz) { return std::llround(freq_mhz); }

double sample_exponential(std::mt19937_64& rng, double mean) {
    std::exponential_distribution<double> d(1.0 / mean);
    return d(rng);
}

Position sample_in_annulus(std::mt19937_64& rng, Position center, double r_min, double r_max) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double angle = 2.0 * std::numbers::pi * u(rng);
    const double r = std::sqrt(r_min * r_min + (r_max * r_max - r_min * r_min) * u(rng));
    return {center.x + r * std::cos(angle), center.y + r * std::sin(angle)};
}

std::size_t sample_index(std::mt19937_64& rng, std::span<const double> weights) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double x = u(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (x < acc) return i;
    }
    return weights.size() - 1;
}

}  // namespace

double distance(Position a, Position b) { return std::hypot(a.x - b.x, a.y - b.y); }

double rsrp_dbm(const Cell& cell, const PropagationModel& model, Position ue) {
    const double d = std::max(distance(cell.position, ue), kMinDistanceM);
    return cell.tx_power_dbm - (model.pl0_db + 10.0 * model.exponent * std::log10(d / model.reference_distance_m));
}

bool a5_triggered(double rsrp_serv_dbm, double rsrp_target_dbm, const A5Thresholds& t, double cio_db) {
    return rsrp_serv_dbm + t.hys_thres3_inter_freq_db < t.thres3_inter_freq_dbm &&
           rsrp_target_dbm - t.hys_thres3_inter_freq_db + cio_db > t.thres3a_inter_freq_dbm;
}

bool cmlb_eligible(const PairKnobs& k, double rc_serving, double rc_target, double rsrp_target_dbm) {
    return k.offload_allowed && rc_serving < k.max_rc && rc_target > k.rc_headroom &&
           rc_target - rc_serving >= k.delta_rc && rsrp_target_dbm >= k.rsrp_cmlb_filter_dbm;
}

PairKnobs KnobMaps::to_knobs(const TsAction& action) const {
    auto map = [&](std::size_t k) { return ranges[k].lo + (ranges[k].hi - ranges[k].lo) * action[k]; };
    PairKnobs knobs;
    knobs.offload_allowed = action.offload_allowed();
    knobs.max_rc = map(kMaxRc);
    knobs.rc_headroom = map(kRcHeadroom);
    knobs.delta_rc = map(kDeltaRc);
    knobs.rsrp_cmlb_filter_dbm = map(kRsrpCmlbFilter);
    knobs.cio_db = map(kCio);
    return knobs;
}

TsAction KnobMaps::to_action(const PairKnobs& knobs) const {
    auto inv = [&](std::size_t k, double v) { return (v - ranges[k].lo) / (ranges[k].hi - ranges[k].lo); };
    ActionVector raw{};
    raw[kOffloadAllowed] = knobs.offload_allowed ? 1.0 : kActionFloor;
    raw[kMaxRc] = inv(kMaxRc, knobs.max_rc);
    raw[kRcHeadroom] = inv(kRcHeadroom, knobs.rc_headroom);
    raw[kDeltaRc] = inv(kDeltaRc, knobs.delta_rc);
    raw[kRsrpCmlbFilter] = inv(kRsrpCmlbFilter, knobs.rsrp_cmlb_filter_dbm);
    raw[kCio] = inv(kCio, knobs.cio_db);
    return TsAction::clamped(raw);
}

const PairKnobs& KnobTable::at(int serving, int target) const {
    auto it = pairs_.find({serving, target});
    if (it == pairs_.end()) throw ConfigError(fmt::format("no knob entry for cell pair ({}, {})", serving, target));
    return it->second;
}

void KnobTable::set_thresholds(double serving_freq_mhz, double target_freq_mhz, const A5Thresholds& t) {
    freq_thresholds_[{freq_key(serving_freq_mhz), freq_key(target_freq_mhz)}] = t;
}

const A5Thresholds& KnobTable::thresholds(double serving_freq_mhz, double target_freq_mhz) const {
    auto it = freq_thresholds_.find({freq_key(serving_freq_mhz), freq_key(target_freq_mhz)});
    return it == freq_thresholds_.end() ? default_thresholds_ : it->second;
}

std::vector<double> imlb_weights(std::span<const double> utilizations, double eps) {
    if (utilizations.empty()) throw DomainError("imlb_weights needs at least one cell");
    std::vector<double> w(utilizations.size());
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = 1.0 - utilizations[i] + eps;
        total += w[i];
    }
    for (double& x : w) x /= total;
    return w;
}

const PropagationModel& ScenarioConfig::propagation_for(double freq_mhz) const {
    auto it = propagation.find(freq_key(freq_mhz));
    if (it == propagation.end()) throw ConfigError(fmt::format("no propagation model for {} MHz", freq_mhz));
    return it->second;
}

int ScenarioConfig::total_ues() const {
    int n = 0;
    for (const auto& g : ue_groups) n += g.count;
    return n;
}

void ScenarioConfig::validate() const {
    if (cells.empty()) throw ConfigError("scenario has no cells");
    if (!(epoch_s > 0.0) || std::fmod(epoch_s * 1000.0, 1.0) != 0.0) {
        throw ConfigError("epoch_s must be a positive whole number of milliseconds");
    }
    if (check_period_ms <= 0) throw ConfigError("check_period_ms must be positive");
    if (horizon_epochs < 0 || warmup_epochs < 0) throw ConfigError("horizon and warmup must be nonnegative");
    if (ho_interruption_ms < 0) throw ConfigError("ho_interruption_ms must be nonnegative");
    if (start_day_of_week < 0 || start_day_of_week > 6) throw ConfigError("start_day_of_week must be in 0..6");
    if (start_time_of_day < 0.0 || start_time_of_day >= 1.0) throw ConfigError("start_time_of_day must be in [0,1)");
    if (!(se_cap > 0.0) || interference_factor < 0.0) throw ConfigError("invalid link abstraction constants");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const Cell& c = cells[i];
        if (c.prb_count <= 0) throw ConfigError(fmt::format("cell {} needs prb_count > 0", c.cell_id));
        if (!(c.carrier_freq_mhz > 0.0)) throw ConfigError(fmt::format("cell {} needs a carrier frequency", c.cell_id));
        propagation_for(c.carrier_freq_mhz);
        for (std::size_t j = 0; j < i; ++j) {
            const Cell& o = cells[j];
            if (o.cell_id == c.cell_id) throw ConfigError(fmt::format("duplicate cell_id {}", c.cell_id));
            if (o.site_id == c.site_id && o.sector_id == c.sector_id &&
                (o.position.x != c.position.x || o.position.y != c.position.y)) {
                throw ConfigError(fmt::format("cells {} and {} share a sector but not a position", o.cell_id, c.cell_id));
            }
        }
    }
    for (const auto& [k, m] : propagation) {
        if (!(m.reference_distance_m > 0.0)) throw ConfigError("propagation reference distance must be positive");
    }
    for (std::size_t k = 0; k < kActionDim; ++k) {
        const auto& r = knob_maps.ranges[k];
        if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || !(r.hi > r.lo)) {
            throw ConfigError(fmt::format("knob range for {} must satisfy lo < hi", knob_name(k)));
        }
    }
    auto finite_thresholds = [](const A5Thresholds& t) {
        return std::isfinite(t.hys_thres3_inter_freq_db) && std::isfinite(t.thres3_inter_freq_dbm) &&
               std::isfinite(t.thres3a_inter_freq_dbm);
    };
    if (!finite_thresholds(default_a5)) throw ConfigError("A5 thresholds must be finite");
    for (const auto& o : a5_overrides) {
        if (!finite_thresholds(std::get<2>(o))) throw ConfigError("A5 thresholds must be finite");
    }
    for (const auto& g : ue_groups) {
        if (g.count < 0) throw ConfigError("ue group count must be nonnegative");
        if (g.min_radius_m < 0.0 || g.max_radius_m < g.min_radius_m) throw ConfigError("ue group radii are inconsistent");
        if (g.speed_mps < 0.0) throw ConfigError("ue speed must be nonnegative");
        if (g.demand.rate_mbps < 0.0 || !(g.demand.mean_on_s > 0.0) || g.demand.mean_off_s < 0.0) {
            throw ConfigError("ue demand profile is invalid");
        }
        if (g.demand.diurnal_amplitude < 0.0 || g.demand.diurnal_amplitude > 1.0) {
            throw ConfigError("diurnal_amplitude must be in [0,1]");
        }
        if (g.camp_cell >= 0) {
            bool found = std::any_of(cells.begin(), cells.end(), [&](const Cell& c) { return c.cell_id == g.camp_cell; });
            if (!found) throw ConfigError(fmt::format("camp_cell {} does not exist", g.camp_cell));
        }
    }
}

std::vector<std::pair<int, int>> neighbor_pairs(const ScenarioConfig& config) {
    std::vector<std::pair<int, int>> out;
    for (const Cell& a : config.cells) {
        for (const Cell& b : config.cells) {
            if (a.cell_id == b.cell_id) continue;
            if (config.intra_sector_only && (a.site_id != b.site_id || a.sector_id != b.sector_id)) continue;
            out.emplace_back(a.cell_id, b.cell_id);
        }
    }
    return out;
}

KnobTable uniform_knob_table(const ScenarioConfig& config, const PairKnobs& knobs) {
    KnobTable t;
    t.set_default_thresholds(config.default_a5);
    for (const auto& [s, f, th] : config.a5_overrides) t.set_thresholds(s, f, th);
    for (const auto& [a, b] : neighbor_pairs(config)) t.set(a, b, knobs);
    return t;
}

Twin::Twin(ScenarioConfig config) : config_(std::move(config)), rng_(config_.seed) {
    config_.validate();
    const std::size_t n_cells = config_.cells.size();
    cells_.resize(n_cells);
    cell_ues_.resize(n_cells);
    alloc_.prbs.assign(n_cells, 0);
    alloc_.served_mbits.assign(n_cells, 0.0);
    noise_mw_ = dbm_to_mw(-174.0 + 10.0 * std::log10(kSubcarrierHz) + config_.noise_figure_db);

    neighbors_.resize(n_cells);
    for (std::size_t i = 0; i < n_cells; ++i) {
        for (std::size_t j = 0; j < n_cells; ++j) {
            if (i == j) continue;
            const Cell& a = config_.cells[i];
            const Cell& b = config_.cells[j];
            if (config_.intra_sector_only && (a.site_id != b.site_id || a.sector_id != b.sector_id)) continue;
            neighbors_[i].push_back(j);
        }
    }

    int next_id = 0;
    const std::vector<double> zero_util(n_cells, 0.0);
    for (std::size_t g = 0; g < config_.ue_groups.size(); ++g) {
        const UeGroup& group = config_.ue_groups[g];
        for (int k = 0; k < group.count; ++k) {
            UeState ue;
            ue.ue_id = next_id++;
            ue.group = g;
            ue.position = sample_in_annulus(rng_, group.center, group.min_radius_m, group.max_radius_m);
            ue.waypoint = sample_in_annulus(rng_, group.center, group.min_radius_m, group.max_radius_m);
            ue.speed_mps = group.speed_mps;
            const DemandProfile& d = group.demand;
            if (d.mean_off_s == 0.0) {
                ue.traffic_on = true;
                ue.traffic_timer_s = std::numeric_limits<double>::infinity();
            } else {
                std::uniform_real_distribution<double> u(0.0, 1.0);
                ue.traffic_on = u(rng_) < d.mean_on_s / (d.mean_on_s + d.mean_off_s);
                ue.traffic_timer_s = sample_exponential(rng_, ue.traffic_on ? d.mean_on_s : d.mean_off_s);
            }
            ue.rsrp_dbm.resize(n_cells);
            update_radio(ue);
            if (group.camp_cell >= 0) {
                ue.cell = cell_index(group.camp_cell);
            } else {
                auto cands = sector_cells(best_cell(ue));
                std::vector<double> utils(cands.size(), 0.0);
                ue.cell = cands[sample_index(rng_, imlb_weights(utils))];
            }
            ue.mode = ue.traffic_on ? RrcMode::kConnected : RrcMode::kIdle;
            ues_.push_back(std::move(ue));
        }
    }
    refresh();
}

std::size_t Twin::cell_index(int cell_id) const {
    for (std::size_t i = 0; i < config_.cells.size(); ++i) {
        if (config_.cells[i].cell_id == cell_id) return i;
    }
    throw ConfigError(fmt::format("unknown cell_id {}", cell_id));
}

double Twin::time_of_day() const {
    const double days = config_.start_time_of_day + static_cast<double>(tti_) / 86'400'000.0;
    return days - std::floor(days);
}

int Twin::day_of_week() const {
    const double days = config_.start_time_of_day + static_cast<double>(tti_) / 86'400'000.0;
    return static_cast<int>((config_.start_day_of_week + static_cast<long long>(std::floor(days))) % 7);
}

std::size_t Twin::best_cell(const UeState& ue) const {
    std::size_t best = 0;
    for (std::size_t c = 1; c < ue.rsrp_dbm.size(); ++c) {
        if (ue.rsrp_dbm[c] > ue.rsrp_dbm[best]) best = c;
    }
    return best;
}

std::vector<std::size_t> Twin::sector_cells(std::size_t cell) const {
    std::vector<std::size_t> out;
    const Cell& ref = config_.cells[cell];
    for (std::size_t c = 0; c < config_.cells.size(); ++c) {
        if (config_.cells[c].site_id == ref.site_id && config_.cells[c].sector_id == ref.sector_id) out.push_back(c);
    }
    return out;
}

double Twin::demand_rate(const UeState& ue) const {
    const DemandProfile& d = config_.ue_groups[ue.group].demand;
    const double phase = 2.0 * std::numbers::pi * (time_of_day() - d.diurnal_peak_tod);
    return d.rate_mbps * (1.0 + d.diurnal_amplitude * std::cos(phase));
}

void Twin::update_radio(UeState& ue) const {
    const auto& cells = config_.cells;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        ue.rsrp_dbm[c] = rsrp_dbm(cells[c], config_.propagation_for(cells[c].carrier_freq_mhz), ue.position);
    }
    const Cell& serving = cells[ue.cell];
    double interference = 0.0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        if (c != ue.cell && cells[c].carrier_freq_mhz == serving.carrier_freq_mhz) {
            interference += dbm_to_mw(ue.rsrp_dbm[c]);
        }
    }
    const double sinr = dbm_to_mw(ue.rsrp_dbm[ue.cell]) / (noise_mw_ + config_.interference_factor * interference);
    ue.spectral_efficiency = std::min(std::log2(1.0 + sinr), config_.se_cap);
}

void Twin::refresh() {
    for (auto& list : cell_ues_) list.clear();
    active_.clear();
    for (std::size_t i = 0; i < ues_.size(); ++i) {
        UeState& ue = ues_[i];
        if (ue.cell >= config_.cells.size()) throw DomainError(fmt::format("ue {} has no valid cell", ue.ue_id));
        if (ue.buffer_mbits < 0.0) throw DomainError(fmt::format("ue {} has a negative buffer", ue.ue_id));
        ue.rsrp_dbm.resize(config_.cells.size());
        update_radio(ue);
        if (ue.mode == RrcMode::kConnected) {
            cell_ues_[ue.cell].push_back(i);
            if (ue.traffic_on) active_.push_back(i);
        }
    }
    for (auto& ue : ues_) ue.rate_mbits_per_tti = demand_rate(ue) / 1000.0;
}

const TtiAllocation& Twin::schedule_tti() {
    for (std::size_t c = 0; c < cells_.size(); ++c) {
        CellRuntime& rt = cells_[c];
        backlog_.clear();
        for (std::size_t i : cell_ues_[c]) {
            const UeState& ue = ues_[i];
            if (ue.buffer_mbits > 0.0 && tti_ >= ue.blocked_until_tti) backlog_.push_back(i);
        }
        int granted = 0;
        double served = 0.0;
        const std::size_t n = backlog_.size();
        if (n > 0) {
            const int capacity = config_.cells[c].prb_count;
            std::size_t remaining = n;
            std::size_t pos = rt.rr_offset % n;
            while (granted < capacity && remaining > 0) {
                UeState& ue = ues_[backlog_[pos]];
                if (ue.buffer_mbits > 0.0) {
                    const double give = std::min(ue.spectral_efficiency * kPrbMbitsPerSe, ue.buffer_mbits);
                    ue.buffer_mbits -= give;
                    ue.served_mbits += give;
                    served += give;
                    ++granted;
                    if (ue.buffer_mbits <= 0.0) {
                        ue.buffer_mbits = 0.0;
                        --remaining;
                    }
                }
                pos = (pos + 1) % n;
            }
            ++rt.rr_offset;
        }
        rt.prb_used_window += granted;
        rt.prb_used_epoch += granted;
        rt.served_mbits_epoch += served;
        rt.max_prbs_in_tti = std::max(rt.max_prbs_in_tti, granted);
        alloc_.prbs[c] = granted;
        alloc_.served_mbits[c] = served;
    }
    ++tti_;
    return alloc_;
}

void Twin::arrive_demand() {
    for (std::size_t i : active_) {
        UeState& ue = ues_[i];
        ue.buffer_mbits += ue.rate_mbits_per_tti;
        ue.offered_mbits += ue.rate_mbits_per_tti;
        cells_[ue.cell].offered_mbits_epoch += ue.rate_mbits_per_tti;
    }
}

void Twin::idle_reselection() {
    for (UeState& ue : ues_) {
        if (ue.mode != RrcMode::kIdle) continue;
        auto cands = sector_cells(best_cell(ue));
        std::vector<double> utils;
        for (std::size_t c : cands) utils.push_back(cells_[c].epoch_util);
        ue.cell = cands[sample_index(rng_, imlb_weights(utils))];
    }
}

void Twin::measurement_step(const KnobTable& knobs, double dt_s) {
    const std::int64_t window_ttis = config_.check_period_ms;
    for (std::size_t c = 0; c < cells_.size(); ++c) {
        CellRuntime& rt = cells_[c];
        rt.window_util = static_cast<double>(rt.prb_used_window) /
                         (static_cast<double>(config_.cells[c].prb_count) * static_cast<double>(window_ttis));
        rt.prb_used_window = 0;
    }

    for (UeState& ue : ues_) {
        if (ue.speed_mps > 0.0) {
            double step = ue.speed_mps * dt_s;
            const double d = distance(ue.position, ue.waypoint);
            if (d <= step) {
                ue.position = ue.waypoint;
                const UeGroup& g = config_.ue_groups[ue.group];
                ue.waypoint = sample_in_annulus(rng_, g.center, g.min_radius_m, g.max_radius_m);
            } else {
                ue.position.x += (ue.waypoint.x - ue.position.x) * step / d;
                ue.position.y += (ue.waypoint.y - ue.position.y) * step / d;
            }
        }

        const DemandProfile& dp = config_.ue_groups[ue.group].demand;
        if (dp.mean_off_s > 0.0) {
            ue.traffic_timer_s -= dt_s;
            while (ue.traffic_timer_s <= 0.0) {
                ue.traffic_on = !ue.traffic_on;
                ue.traffic_timer_s += sample_exponential(rng_, ue.traffic_on ? dp.mean_on_s : dp.mean_off_s);
            }
        }

        if (ue.mode == RrcMode::kIdle && ue.traffic_on) {
            ue.mode = RrcMode::kConnected;
            ue.inactive_s = 0.0;
        } else if (ue.mode == RrcMode::kConnected) {
            if (!ue.traffic_on && ue.buffer_mbits <= 0.0) {
                ue.inactive_s += dt_s;
                if (ue.inactive_s >= config_.idle_inactivity_s) ue.mode = RrcMode::kIdle;
            } else {
                ue.inactive_s = 0.0;
            }
        }
    }

    for (UeState& ue : ues_) update_radio(ue);
    handover_checks(knobs);
    refresh();
    for (std::size_t c = 0; c < cells_.size(); ++c) {
        cells_[c].connected_sum += static_cast<double>(cell_ues_[c].size());
        ++cells_[c].connected_samples;
    }
}

void Twin::handover_checks(const KnobTable& knobs) {
    const auto& cells = config_.cells;
    for (UeState& ue : ues_) {
        if (ue.mode != RrcMode::kConnected || ue.last_ho_epoch == epoch_ || tti_ < ue.blocked_until_tti) continue;
        const std::size_t s = ue.cell;
        const double rc_s = 1.0 - cells_[s].window_util;
        std::size_t best = s;
        for (std::size_t t : neighbors_[s]) {
            const PairKnobs& k = knobs.at(cells[s].cell_id, cells[t].cell_id);
            const A5Thresholds& th = knobs.thresholds(cells[s].carrier_freq_mhz, cells[t].carrier_freq_mhz);
            if (!a5_triggered(ue.rsrp_dbm[s], ue.rsrp_dbm[t], th, k.cio_db)) continue;
            if (!cmlb_eligible(k, rc_s, 1.0 - cells_[t].window_util, ue.rsrp_dbm[t])) continue;
            if (best == s || ue.rsrp_dbm[t] > ue.rsrp_dbm[best] ||
                (ue.rsrp_dbm[t] == ue.rsrp_dbm[best] && cells[t].cell_id < cells[best].cell_id)) {
                best = t;
            }
        }
        if (best == s) continue;
        ue.cell = best;
        ue.last_ho_epoch = epoch_;
        ue.blocked_until_tti = tti_ + config_.ho_interruption_ms;
        ++ue.ho_count;
        ++cells_[s].ho_out;
        ++cells_[best].ho_in;
        update_radio(ue);
    }
}

EpochReport Twin::step_epoch(const KnobTable& knobs) {
    for (std::size_t s = 0; s < neighbors_.size(); ++s) {
        for (std::size_t t : neighbors_[s]) knobs.at(config_.cells[s].cell_id, config_.cells[t].cell_id);
    }
    idle_reselection();
    refresh();
    for (CellRuntime& rt : cells_) {
        rt.prb_used_epoch = 0;
        rt.served_mbits_epoch = 0.0;
        rt.offered_mbits_epoch = 0.0;
        rt.connected_sum = 0.0;
        rt.connected_samples = 0;
        rt.ho_out = 0;
        rt.ho_in = 0;
        rt.max_prbs_in_tti = 0;
    }

    const auto ttis = static_cast<std::int64_t>(std::llround(config_.epoch_s * 1000.0));
    const std::int64_t period = config_.check_period_ms;
    const double dt_s = static_cast<double>(period) / 1000.0;
    for (std::int64_t k = 0; k < ttis; ++k) {
        if (k % period == 0) measurement_step(knobs, dt_s);
        arrive_demand();
        schedule_tti();
    }

    EpochReport report;
    report.epoch = epoch_;
    report.time_of_day = time_of_day();
    report.day_of_week = day_of_week();
    for (std::size_t c = 0; c < cells_.size(); ++c) {
        CellRuntime& rt = cells_[c];
        const Cell& cell = config_.cells[c];
        rt.epoch_util = static_cast<double>(rt.prb_used_epoch) /
                        (static_cast<double>(cell.prb_count) * static_cast<double>(ttis));
        CellKpi kpi;
        kpi.cell_id = cell.cell_id;
        kpi.prb_util = rt.epoch_util;
        kpi.rc = 1.0 - rt.epoch_util;
        kpi.connected_ues = rt.connected_samples > 0 ? rt.connected_sum / rt.connected_samples : 0.0;
        kpi.served_mbits = rt.served_mbits_epoch;
        kpi.offered_mbits = rt.offered_mbits_epoch;
        kpi.throughput_mbps = compute_reward(rt.served_mbits_epoch, config_.epoch_s);
        kpi.ho_out = rt.ho_out;
        kpi.ho_in = rt.ho_in;
        kpi.max_prbs_in_tti = rt.max_prbs_in_tti;
        kpi.prb_count = cell.prb_count;
        report.handovers += rt.ho_out;
        report.cells.push_back(kpi);
    }
    ++epoch_;
    return report;
}

EpochReport Twin::snapshot() const {
    EpochReport report;
    report.epoch = epoch_;
    report.time_of_day = time_of_day();
    report.day_of_week = day_of_week();
    for (std::size_t c = 0; c < cells_.size(); ++c) {
        CellKpi kpi;
        kpi.cell_id = config_.cells[c].cell_id;
        kpi.prb_util = cells_[c].epoch_util;
        kpi.rc = 1.0 - kpi.prb_util;
        kpi.connected_ues = static_cast<double>(cell_ues_[c].size());
        kpi.prb_count = config_.cells[c].prb_count;
        report.cells.push_back(kpi);
    }
    return report;
}

std::vector<PairObservation> Twin::pair_observations(const EpochReport& report) const {
    std::vector<PairObservation> out;
    for (std::size_t s = 0; s < neighbors_.size(); ++s) {
        for (std::size_t t : neighbors_[s]) {
            PairObservation o;
            o.serving_cell = config_.cells[s].cell_id;
            o.target_cell = config_.cells[t].cell_id;
            o.state.serving_freq_mhz = config_.cells[s].carrier_freq_mhz;
            o.state.target_freq_mhz = config_.cells[t].carrier_freq_mhz;
            o.state.time_of_day = report.time_of_day;
            o.state.day_of_week = report.day_of_week;
            o.state.serving_prb_util = report.cells[s].prb_util;
            o.state.target_prb_util = report.cells[t].prb_util;
            o.state.serving_throughput_mbps = report.cells[s].throughput_mbps;
            o.state.target_throughput_mbps = report.cells[t].throughput_mbps;
            out.push_back(o);
        }
    }
    return out;
}

std::vector<std::array<int, 3>> Twin::cmlb_eligible_triples(const KnobTable& knobs) const {
    std::vector<std::array<int, 3>> out;
    const auto& cells = config_.cells;
    for (const UeState& ue : ues_) {
        if (ue.mode != RrcMode::kConnected) continue;
        const std::size_t s = ue.cell;
        for (std::size_t t : neighbors_[s]) {
            const PairKnobs& k = knobs.at(cells[s].cell_id, cells[t].cell_id);
            if (cmlb_eligible(k, 1.0 - cells_[s].window_util, 1.0 - cells_[t].window_util, ue.rsrp_dbm[t])) {
                out.push_back({cells[s].cell_id, cells[t].cell_id, ue.ue_id});
            }
        }
    }
    return out;
}

double RunResult::mean_aggregate_throughput() const {
    if (epochs.empty()) return 0.0;
    double total = 0.0;
    for (const auto& e : epochs) {
        for (const auto& c : e.cells) total += c.throughput_mbps;
    }
    return total / static_cast<double>(epochs.size());
}

int RunResult::total_handovers() const {
    int n = 0;
    for (const auto& e : epochs) n += e.handovers;
    return n;
}

double RunResult::fraction_ues_with_at_most(int limit) const {
    if (ue_handovers.empty()) return 1.0;
    const auto n = std::count_if(ue_handovers.begin(), ue_handovers.end(), [&](int h) { return h <= limit; });
    return static_cast<double>(n) / static_cast<double>(ue_handovers.size());
}

RunResult run_scenario(const ScenarioConfig& config, Controller& controller) {
    Twin twin(config);
    const KnobTable baseline = uniform_knob_table(config, config.baseline_knobs);
    EpochReport last = twin.snapshot();
    for (int w = 0; w < config.warmup_epochs; ++w) last = twin.step_epoch(baseline);

    std::vector<int> ho_before;
    for (const auto& ue : twin.ues()) ho_before.push_back(ue.ho_count);

    RunResult result;
    auto observations = twin.pair_observations(last);
    for (int e = 0; e < config.horizon_epochs; ++e) {
        std::vector<TsAction> actions;
        KnobTable table;
        table.set_default_thresholds(config.default_a5);
        for (const auto& [s, t, th] : config.a5_overrides) table.set_thresholds(s, t, th);
        try {
            actions = controller.decide(e, observations);
            if (actions.size() != observations.size()) {
                throw UsageError(fmt::format("expected {} actions, got {}", observations.size(), actions.size()));
            }
            for (std::size_t k = 0; k < actions.size(); ++k) {
                actions[k].validate();
                table.set(observations[k].serving_cell, observations[k].target_cell,
                          config.knob_maps.to_knobs(actions[k]));
            }
        } catch (const std::exception& ex) {
            throw Error(fmt::format("controller '{}' failed at epoch {}: {}", controller.name(), e, ex.what()));
        }

        EpochReport report = twin.step_epoch(table);
        report.epoch = e;
        auto next = twin.pair_observations(report);
        std::vector<Transition> step;
        step.reserve(next.size());
        for (std::size_t k = 0; k < next.size(); ++k) {
            Transition tr;
            tr.state = observations[k].state;
            tr.action = actions[k];
            tr.reward = next[k].state.serving_throughput_mbps + next[k].state.target_throughput_mbps;
            tr.next_state = next[k].state;
            tr.epoch_index = e;
            tr.serving_cell_id = observations[k].serving_cell;
            tr.target_cell_id = observations[k].target_cell;
            tr.terminal = e + 1 == config.horizon_epochs;
            step.push_back(tr);
        }
        try {
            controller.observe(step);
        } catch (const std::exception& ex) {
            throw Error(fmt::format("controller '{}' failed at epoch {}: {}", controller.name(), e, ex.what()));
        }
        for (const auto& c : report.cells) {
            result.offered_mbits += c.offered_mbits;
            result.served_mbits += c.served_mbits;
        }
        result.transitions.insert(result.transitions.end(), step.begin(), step.end());
        result.epochs.push_back(std::move(report));
        observations = std::move(next);
    }
    for (std::size_t i = 0; i < twin.ues().size(); ++i) {
        result.ue_handovers.push_back(twin.ues()[i].ho_count - ho_before[i]);
    }
    return result;
}

std::string kpi_csv(const RunResult& result) {
    std::string out = "epoch,cell_id,prb_util,rc,connected_ues,served_mbits,throughput_mbps,ho_out,ho_in\n";
    for (const auto& e : result.epochs) {
        for (const auto& c : e.cells) {
            out += fmt::format("{},{},{},{},{},{},{},{},{}\n", e.epoch, c.cell_id, c.prb_util, c.rc, c.connected_ues,
                               c.served_mbits, c.throughput_mbps, c.ho_out, c.ho_in);
        }
    }
    return out;
}

std::string ue_handover_csv(const RunResult& result) {
    std::string out = "ue_id,handovers\n";
    for (std::size_t i = 0; i < result.ue_handovers.size(); ++i) {
        out += fmt::format("{},{}\n", i, result.ue_handovers[i]);
    }
    return out;
}

OfflineDataset to_dataset(std::vector<Transition> transitions) {
    OfflineDataset ds;
    ds.transitions = std::move(transitions);
    ds.refresh_normalization();
    return ds;
}

}  // namespace carl::twin
