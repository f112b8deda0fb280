#include "hcw/cell_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hcw/error.hpp"

namespace hcw {
namespace {

using nlohmann::json;

double parse_value(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    const auto slash = s.find('/');
    try {
      if (slash == std::string::npos) return std::stod(s);
      const double num = std::stod(s.substr(0, slash));
      const double den = std::stod(s.substr(slash + 1));
      if (den == 0.0) raise(ErrorKind::ParseError, "zero denominator in \"" + s + "\"");
      return num / den;
    } catch (const std::logic_error&) {
      raise(ErrorKind::ParseError, "cannot parse value \"" + s + "\"");
    }
  }
  raise(ErrorKind::ParseError, "kernel value must be a number or a rational string");
}

Point parse_point(const json& j, const char* what) {
  if (!j.is_array()) raise(ErrorKind::ParseError, std::string(what) + " must be an array");
  Point p;
  for (const auto& c : j) p.push_back(c.get<int>());
  return p;
}

std::vector<KernelRecord> parse_records(const json& root, const char* key) {
  std::vector<KernelRecord> out;
  if (!root.contains(key)) return out;
  const json& arr = root.at(key);
  if (!arr.is_array()) raise(ErrorKind::ParseError, std::string(key) + " must be an array");
  for (const auto& r : arr) {
    KernelRecord rec;
    rec.site = parse_point(r.at("site"), "site");
    rec.offset = parse_point(r.at("offset"), "offset");
    rec.value = parse_value(r.at("value"));
    out.push_back(std::move(rec));
  }
  return out;
}

CellConfig from_json(const json& root) {
  if (root.contains("preset")) {
    const auto name = root.at("preset").get<std::string>();
    if (name != "appendix2") raise(ErrorKind::ParseError, "unknown preset \"" + name + "\"");
    Appendix2Options o;
    if (root.contains("K")) o.drift_k = parse_value(root.at("K"));
    if (root.contains("hold")) o.hold = parse_value(root.at("hold"));
    if (root.contains("bulk_exchange")) o.bulk_exchange = parse_value(root.at("bulk_exchange"));
    if (root.contains("astral_exchange"))
      o.astral_exchange = parse_value(root.at("astral_exchange"));
    if (root.contains("m")) o.absorption = parse_value(root.at("m"));
    return appendix2_config(o);
  }
  CellConfig c;
  c.dimension = root.at("dimension").get<int>();
  c.period = root.at("period").get<std::vector<int>>();
  for (const auto& a : root.at("astral_sites")) c.astral_sites.push_back(parse_point(a, "astral site"));
  c.p0 = parse_records(root, "p0");
  c.d = parse_records(root, "D");
  c.v = parse_records(root, "V");
  c.m = root.contains("m") ? parse_value(root.at("m")) : 0.0;
  if (root.contains("range")) c.range = root.at("range").get<int>();
  return c;
}

}  // namespace

CellConfig parse_cell_config(std::string_view json_text) {
  try {
    return from_json(json::parse(json_text));
  } catch (const json::exception& e) {
    raise(ErrorKind::ParseError, e.what());
  }
}

CellConfig load_cell_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::InvalidArgument, "cannot open cell file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_cell_config(ss.str());
}

std::string dump_cell_config(const CellConfig& c) {
  // One kernel record per line keeps bundled cell files diffable.
  std::ostringstream os;
  os << "{\n"
     << "  \"dimension\": " << c.dimension << ",\n"
     << "  \"period\": " << json(c.period).dump() << ",\n"
     << "  \"astral_sites\": " << json(c.astral_sites).dump() << ",\n"
     << "  \"m\": " << json(c.m).dump() << ",\n";
  if (c.range) os << "  \"range\": " << *c.range << ",\n";
  auto records = [&](const char* key, const std::vector<KernelRecord>& rs, bool last) {
    os << "  \"" << key << "\": [";
    for (std::size_t i = 0; i < rs.size(); ++i) {
      nlohmann::ordered_json r;
      r["site"] = rs[i].site;
      r["offset"] = rs[i].offset;
      r["value"] = rs[i].value;
      os << (i == 0 ? "\n    " : ",\n    ") << r.dump();
    }
    os << (rs.empty() ? "]" : "\n  ]") << (last ? "\n" : ",\n");
  };
  records("p0", c.p0, false);
  records("D", c.d, false);
  records("V", c.v, true);
  os << "}\n";
  return os.str();
}

}  // namespace hcw
