#pragma once

#include <string>
#include <vector>

#include "crossalpha/panel.hpp"

namespace crossalpha {

/// One factor aligned to a PricePanel: T x N values plus validity mask.
/// `lineage` records the kernel applications that produced it, for reports.
struct FactorPanel {
  Matrix values;
  Mask mask;
  std::string name;
  std::vector<std::string> lineage;

  int rows() const { return static_cast<int>(values.rows()); }
  int cols() const { return static_cast<int>(values.cols()); }
};

/// Factor CSV schema: header `date,security_id,value`, one row per valid
/// cell. Alignment against `panel` supplies dimensions and indices.
void write_factor(const FactorPanel& factor, const PricePanel& panel,
                  const std::string& path);
FactorPanel read_factor(const std::string& path, const PricePanel& panel,
                        const std::string& name);

}  // namespace crossalpha
