#include "daug/reports.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace daug {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string metrics_csv(const std::vector<MetricsReport>& records) {
  std::ostringstream out;
  out << kMetricsHeader << "\n";
  for (const MetricsReport& r : records)
    out << r.epoch << "," << format_double(r.loss) << "," << format_double(r.probe_coarse)
        << "," << format_double(r.probe_fine) << "," << format_double(r.alignment) << ","
        << format_double(r.uniformity) << "\n";
  return out.str();
}

std::string cka_csv(const MetricsReport& rec) {
  std::ostringstream out;
  out << "layer";
  for (int l : rec.cka_layers) out << "," << l;
  out << "\n";
  for (std::size_t i = 0; i < rec.cka.size(); ++i) {
    out << rec.cka_layers[i];
    for (double v : rec.cka[i]) out << "," << format_double(v);
    out << "\n";
  }
  return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << content;
  if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void write_run_reports(const std::string& dir, const std::vector<MetricsReport>& records,
                       bool json) {
  std::filesystem::create_directories(dir);
  write_text_file(dir + "/metrics.csv", metrics_csv(records));
  for (const MetricsReport& r : records)
    write_text_file(dir + "/cka_epoch" + std::to_string(r.epoch) + ".csv", cka_csv(r));

  if (!json) return;
  nlohmann::json j = nlohmann::json::array();
  for (const MetricsReport& r : records) {
    nlohmann::json rec{{"epoch", r.epoch},
                       {"loss", r.loss},
                       {"probe_coarse", r.probe_coarse},
                       {"probe_fine", r.probe_fine},
                       {"alignment", r.alignment},
                       {"uniformity", r.uniformity},
                       {"cka_layers", r.cka_layers},
                       {"cka", r.cka}};
    j.push_back(std::move(rec));
  }
  write_text_file(dir + "/metrics.json", j.dump(2) + "\n");
}

}  // namespace daug
