#pragma once

#include <string>
#include <vector>

#include "daug/trainer.hpp"

namespace daug {

// Fixed CSV schemas; column order is part of the interface.
inline constexpr const char* kMetricsHeader =
    "epoch,loss,probe_coarse,probe_fine,alignment,uniformity";

std::string format_double(double v);

std::string metrics_csv(const std::vector<MetricsReport>& records);
std::string cka_csv(const MetricsReport& rec);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// writes metrics.csv and cka_epoch<k>.csv into dir; with json also .json mirrors
void write_run_reports(const std::string& dir, const std::vector<MetricsReport>& records,
                       bool json);

}  // namespace daug
