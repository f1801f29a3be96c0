#pragma once

#include <optional>
#include <string>
#include <vector>

namespace softseg::csv {

// Deterministic float formatting (%.10g) so emitted files are reproducible
// bytewise for a fixed build. Missing optionals become empty cells.
std::string fmt(double v);
std::string fmt(std::optional<double> v);

// strtod without the out-of-range throw (std::stod rejects subnormals).
double parse(const std::string& cell);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void save(const std::string& path) const;
    static Table load(const std::string& path);

    int column(const std::string& name) const;  // -1 when absent
};

}  // namespace softseg::csv
