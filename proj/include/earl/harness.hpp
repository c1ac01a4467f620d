#pragma once

// Ablation table and fixed-budget sweep drivers.

#include <cmath>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "earl/config.hpp"
#include "earl/dataset.hpp"
#include "earl/encoder.hpp"
#include "earl/evaluator.hpp"
#include "earl/trainer.hpp"

namespace earl {

struct AblationResult {
  Ablation which = Ablation::kFull;
  TrainConfig config;
  EvalReport report;
  std::vector<LogRow> log;
};

// Trains and evaluates the full model and the five ablations, in table order.
inline std::vector<AblationResult> run_ablations(Dataset& ds, const TrainConfig& base, Split split = Split::kTest,
                                                 const std::function<void(const AblationResult&)>& on_done = {}) {
  std::vector<AblationResult> out;
  for (Ablation a : kAllAblations) {
    AblationResult r;
    r.which = a;
    r.config = base;
    r.config.flags = flags_for(a);
    resolve_index(ds, r.config);
    Trainer trainer(ds, r.config);
    r.log = trainer.run();
    r.report = evaluate(ds, trainer.params(), split);
    r.report.config = to_json(r.config);
    out.push_back(std::move(r));
    if (on_done) on_done(out.back());
  }
  return out;
}

inline std::string format_ablation_table(const std::vector<AblationResult>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(24) << "" << std::right << std::setw(6) << "Dim" << std::setw(9) << "#P(M)"
     << std::setw(8) << "MRR" << std::setw(9) << "Hits@10" << std::setw(8) << "Effi" << '\n';
  os << std::fixed;
  for (const auto& r : rows) {
    os << std::left << std::setw(24) << ablation_label(r.which) << std::right << std::setw(6) << r.config.dim
       << std::setw(9) << std::setprecision(3) << static_cast<double>(r.report.param_count) / 1e6 << std::setw(8)
       << r.report.mrr << std::setw(9) << r.report.hits.at(10) << std::setw(8) << r.report.effi << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Fixed parameter budget

struct GridPoint {
  std::size_t dim = 0;
  std::size_t reserved = 0;
};

inline std::size_t grid_params(const TrainConfig& base, std::size_t num_relations, GridPoint p) {
  TrainConfig c = base;
  c.dim = p.dim;
  return count_params(c.model_config(num_relations, p.reserved)).total;
}

// Reserved count that brings `dim` closest to `budget`; 0 if even one
// reserved entity overshoots by more than the tolerance.
inline std::size_t fit_reserved(const TrainConfig& base, std::size_t num_relations, std::size_t dim,
                                std::size_t budget) {
  const auto fixed = grid_params(base, num_relations, {dim, 0});
  const auto d = 2 * dim;
  if (fixed >= budget) return 0;
  return static_cast<std::size_t>(std::llround(static_cast<double>(budget - fixed) / static_cast<double>(d)));
}

// Throws ConfigError naming every point outside budget +- tolerance.
inline void check_budget(const TrainConfig& base, std::size_t num_relations, std::size_t num_entities,
                         const std::vector<GridPoint>& grid, std::size_t budget, double tolerance = 0.05) {
  std::ostringstream bad;
  for (const auto& p : grid) {
    const auto n = grid_params(base, num_relations, p);
    const double dev = std::abs(static_cast<double>(n) - static_cast<double>(budget)) / static_cast<double>(budget);
    if (p.reserved == 0 || p.reserved > num_entities) {
      bad << " (dim " << p.dim << ", reserved " << p.reserved << ": reserved count out of range)";
    } else if (dev > tolerance) {
      bad << " (dim " << p.dim << ", reserved " << p.reserved << ": " << n << " params, " << std::fixed
          << std::setprecision(1) << 100.0 * dev << "% off)";
    }
  }
  if (!bad.str().empty()) {
    throw ConfigError("grid points violate the " + std::to_string(budget) + "-parameter budget:" + bad.str());
  }
}

struct SweepRow {
  GridPoint point;
  std::size_t params = 0;
  EvalReport report;
};

inline std::vector<SweepRow> budget_sweep(Dataset& ds, const TrainConfig& base, std::size_t budget,
                                          const std::vector<GridPoint>& grid, Split split = Split::kTest,
                                          const std::function<void(const SweepRow&)>& on_done = {}) {
  if (!base.flags.use_reserved) throw ConfigError("budget sweep varies the reserved count; reserved entities must be on");
  check_budget(base, ds.kg.num_relations(), ds.kg.num_entities(), grid, budget);
  std::vector<SweepRow> out;
  for (const auto& p : grid) {
    TrainConfig c = base;
    c.dim = p.dim;
    c.reserved_count = p.reserved;
    resolve_index(ds, c);
    Trainer trainer(ds, c);
    trainer.run();
    SweepRow row{p, trainer.params().size(), evaluate(ds, trainer.params(), split)};
    row.report.config = to_json(c);
    out.push_back(std::move(row));
    if (on_done) on_done(out.back());
  }
  return out;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "dim,reserved_count,params,mrr,hits10\n";
  os.precision(6);
  for (const auto& r : rows) {
    os << r.point.dim << ',' << r.point.reserved << ',' << r.params << ',' << std::fixed << r.report.mrr << ','
       << r.report.hits.at(10) << '\n';
    os.unsetf(std::ios::fixed);
  }
  return os.str();
}

}  // namespace earl
