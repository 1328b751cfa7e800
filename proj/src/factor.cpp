#include "crossalpha/factor.hpp"

#include <fstream>
#include <map>

#include "crossalpha/csv.hpp"
#include "crossalpha/errors.hpp"

namespace crossalpha {

void write_factor(const FactorPanel& factor, const PricePanel& panel,
                  const std::string& path) {
  if (factor.rows() != panel.rows() || factor.cols() != panel.cols()) {
    throw DomainError("factor '" + factor.name + "' not aligned to panel");
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << "date,security_id,value\n";
  for (int t = 0; t < factor.rows(); ++t) {
    for (int i = 0; i < factor.cols(); ++i) {
      if (!factor.mask(t, i)) continue;
      out << panel.dates[t] << ',' << panel.securities[i] << ','
          << format_double(factor.values(t, i)) << '\n';
    }
  }
}

FactorPanel read_factor(const std::string& path, const PricePanel& panel,
                        const std::string& name) {
  CsvTable table = read_csv(path);
  const int cd = table.column("date");
  const int cs = table.column("security_id");
  const int cv = table.column("value");
  if (cd < 0 || cs < 0 || cv < 0) {
    throw ParseError(path + ": factor CSV needs columns date,security_id,value");
  }
  std::map<std::string, int> date_index;
  std::map<std::string, int> sec_index;
  for (int t = 0; t < panel.rows(); ++t) date_index[panel.dates[t]] = t;
  for (int i = 0; i < panel.cols(); ++i) sec_index[panel.securities[i]] = i;

  FactorPanel factor;
  factor.name = name;
  factor.values = Matrix::Zero(panel.rows(), panel.cols());
  factor.mask = Mask::Constant(panel.rows(), panel.cols(), false);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    auto dit = date_index.find(row[cd]);
    auto sit = sec_index.find(row[cs]);
    if (dit == date_index.end() || sit == sec_index.end()) continue;  // outside panel
    factor.values(dit->second, sit->second) =
        parse_double(row[cv], table.line_numbers[r]);
    factor.mask(dit->second, sit->second) = true;
  }
  return factor;
}

}  // namespace crossalpha
