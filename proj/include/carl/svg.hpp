#pragma once

#include <array>
#include <string>
#include <vector>

namespace carl::svg {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

std::string bar_chart(const std::string& title, const std::vector<std::string>& labels,
                      const std::vector<double>& values);

std::string grouped_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                              const std::vector<std::string>& groups,
                              const std::vector<std::array<double, 3>>& values);

std::string line_chart(const std::string& title, const std::string& x_label, const std::vector<Series>& series);

}  // namespace carl::svg
