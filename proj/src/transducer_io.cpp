#include <json.hpp>

#include <fstream>
#include <sstream>

#include "meb/csv.hpp"
#include "meb/transducer.hpp"

namespace meb {

using nlohmann::json;

std::vector<ImpedanceSample> read_impedance_csv(const std::string& path) {
  const auto table = read_csv(path, {"freq_hz", "re_ohm", "im_ohm"});
  std::vector<ImpedanceSample> out;
  out.reserve(table.size());
  for (const auto& row : table) {
    if (!out.empty() && !(row[0] > out.back().f)) {
      fail(ErrorKind::input, path + ": frequencies must be strictly increasing");
    }
    out.push_back({row[0], Complex(row[1], row[2])});
  }
  return out;
}

void write_impedance_csv(const std::string& path, std::span<const ImpedanceSample> samples) {
  CsvWriter w(path, {"freq_hz", "re_ohm", "im_ohm"});
  for (const auto& s : samples) w.row({s.f, s.z.real(), s.z.imag()});
  w.commit();
}

TransducerModel model_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
    std::vector<ResonanceBranch> branches;
    for (const auto& b : j.at("branches")) {
      branches.push_back({b.at("r_ohm").get<double>(), b.at("l_henry").get<double>(),
                          b.at("c_farad").get<double>()});
    }
    return TransducerModel(j.at("c_p_farad").get<double>(), std::move(branches),
                           j.value("drive_gain", 1.0));
  } catch (const json::exception& e) {
    fail(ErrorKind::input, std::string("model json: ") + e.what());
  }
}

std::string model_to_json_text(const TransducerModel& model) {
  json j;
  j["c_p_farad"] = model.c_p();
  j["drive_gain"] = model.drive_gain();
  j["branches"] = json::array();
  for (const auto& b : model.branches()) {
    j["branches"].push_back({{"r_ohm", b.r_m}, {"l_henry", b.l_m}, {"c_farad", b.c_m}});
  }
  return j.dump(2);
}

TransducerModel read_model_json(const std::string& path) {
  return model_from_json_text(read_text_file(path));
}

void write_model_json(const std::string& path, const TransducerModel& model) {
  write_text_file_atomic(path, model_to_json_text(model) + "\n");
}

}  // namespace meb
