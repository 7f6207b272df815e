#include "hg/manifest/manifest.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "hg/common/error.hpp"
#include "hg/common/time.hpp"
#include "hg/domain/serialize.hpp"

namespace hg::manifest {
namespace {

std::string escape_token(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

Json typed_scalar(const YAML::Node& node) {
  const std::string& s = node.Scalar();
  if (node.Tag() == "!") return s;  // quoted
  if (s.empty() || s == "~" || s == "null" || s == "Null" || s == "NULL") return nullptr;
  if (s == "true" || s == "True" || s == "TRUE") return true;
  if (s == "false" || s == "False" || s == "FALSE") return false;
  std::int64_t i = 0;
  auto [ip, iec] = std::from_chars(s.data(), s.data() + s.size(), i);
  if (iec == std::errc() && ip == s.data() + s.size()) return i;
  double d = 0;
  auto [dp, dec] = std::from_chars(s.data(), s.data() + s.size(), d);
  if (dec == std::errc() && dp == s.data() + s.size()) return d;
  return s;
}

Json convert(const YAML::Node& node, const std::string& pointer, Manifest& m) {
  m.lines[pointer] = node.Mark().line + 1;
  switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      return nullptr;
    case YAML::NodeType::Scalar:
      return typed_scalar(node);
    case YAML::NodeType::Sequence: {
      Json arr = Json::array();
      std::size_t i = 0;
      for (const auto& item : node) {
        arr.push_back(convert(item, pointer + "/" + std::to_string(i++), m));
      }
      return arr;
    }
    case YAML::NodeType::Map: {
      Json obj = Json::object();
      for (const auto& kv : node) {
        const std::string key = kv.first.as<std::string>();
        const std::string child = pointer + "/" + escape_token(key);
        if (obj.contains(key)) {
          m.lines[child] = kv.first.Mark().line + 1;
          throw Error(ErrorCode::kValidation, m.where(child, "duplicate key"));
        }
        obj[key] = convert(kv.second, child, m);
      }
      return obj;
    }
  }
  return nullptr;
}

// "/testsets/0/tests/1/kind" -> "testsets[0].tests[1].kind"
std::string dotted(const std::string& pointer) {
  if (pointer.empty()) return "(root)";
  std::string out;
  std::stringstream in(pointer.substr(1));
  std::string tok;
  while (std::getline(in, tok, '/')) {
    const bool index = !tok.empty() && std::all_of(tok.begin(), tok.end(), ::isdigit);
    if (index) {
      out += "[" + tok + "]";
    } else {
      if (!out.empty()) out += ".";
      out += tok;
    }
  }
  return out;
}

class Checker {
 public:
  explicit Checker(const Manifest& m) : m_(m) {}

  [[noreturn]] void fail(const std::string& pointer, const std::string& msg) const {
    throw Error(ErrorCode::kValidation, m_.where(pointer, msg));
  }

  const Json& object(const Json& j, const std::string& ptr, std::set<std::string> required,
                     const std::set<std::string>& optional) const {
    if (!j.is_object()) fail(ptr, "expected a mapping");
    for (const auto& [k, v] : j.items()) {
      if (!required.count(k) && !optional.count(k)) fail(ptr + "/" + escape_token(k), "unknown key");
    }
    for (const auto& k : required) {
      if (!j.contains(k)) fail(ptr, "missing key '" + k + "'");
    }
    return j;
  }

  std::string string(const Json& j, const std::string& key, const std::string& ptr) const {
    const Json& v = j.at(key);
    if (!v.is_string() || v.get<std::string>().empty()) {
      fail(ptr + "/" + key, "expected a non-empty string");
    }
    return v.get<std::string>();
  }

  const Json& list(const Json& j, const std::string& key, const std::string& ptr) const {
    const Json& v = j.at(key);
    if (!v.is_array()) fail(ptr + "/" + key, "expected a list");
    return v;
  }

  void time_of_day(const Json& j, const std::string& key, const std::string& ptr) const {
    if (!j.contains(key)) return;
    const std::string s = string(j, key, ptr);
    try {
      parse_time_of_day(s);
    } catch (const Error&) {
      fail(ptr + "/" + key, "expected HH:MM, got '" + s + "'");
    }
  }

  void date(const Json& j, const std::string& key, const std::string& ptr) const {
    if (!j.contains(key)) return;
    const std::string s = string(j, key, ptr);
    try {
      parse_date(s);
    } catch (const Error&) {
      fail(ptr + "/" + key, "expected YYYY-MM-DD, got '" + s + "'");
    }
  }

  template <typename Parse>
  void enumerated(const Json& j, const std::string& key, const std::string& ptr, Parse parse,
                  const std::string& what) const {
    const std::string s = string(j, key, ptr);
    if (!parse(s)) fail(ptr + "/" + key, "unknown " + what + " '" + s + "'");
  }

  void unique(std::set<std::string>& seen, const std::string& name, const std::string& ptr) const {
    if (!seen.insert(name).second) fail(ptr + "/name", "duplicate name '" + name + "'");
  }

  void run() {
    const Json& d = m_.doc;
    object(d, "", {"study"}, {"subjects", "cohorts", "testsets", "tasks", "rules"});
    string(d, "study", "");

    std::set<std::string> subjects, cohorts, testsets, rules;
    for (std::size_t i = 0; d.contains("subjects") && i < list(d, "subjects", "").size(); ++i) {
      const std::string p = "/subjects/" + std::to_string(i);
      const Json& s = object(d["subjects"][i], p, {"raw_id"}, {"device_id", "attributes"});
      if (!subjects.insert(string(s, "raw_id", p)).second) fail(p + "/raw_id", "duplicate raw_id");
      if (s.contains("device_id")) string(s, "device_id", p);
      if (s.contains("attributes")) {
        if (!s["attributes"].is_object()) fail(p + "/attributes", "expected a mapping");
        for (const auto& [k, v] : s["attributes"].items()) {
          if (!v.is_string() && !v.is_number() && !v.is_boolean()) {
            fail(p + "/attributes/" + escape_token(k), "expected a string, number or boolean");
          }
        }
      }
    }

    for (std::size_t i = 0; d.contains("cohorts") && i < list(d, "cohorts", "").size(); ++i) {
      const std::string p = "/cohorts/" + std::to_string(i);
      const Json& c = object(d["cohorts"][i], p, {"name"}, {"filter", "explicit"});
      unique(cohorts, string(c, "name", p), p);
      if (c.contains("filter") == c.contains("explicit")) {
        fail(p, "cohort needs exactly one of 'filter' or 'explicit'");
      }
      if (c.contains("explicit")) {
        const Json& ids = list(c, "explicit", p);
        for (std::size_t k = 0; k < ids.size(); ++k) {
          const std::string q = p + "/explicit/" + std::to_string(k);
          if (!ids[k].is_string() || !subjects.count(ids[k].get<std::string>())) {
            fail(q, "not a raw_id listed under subjects");
          }
        }
      } else {
        const Json& clauses = list(c, "filter", p);
        for (std::size_t k = 0; k < clauses.size(); ++k) {
          const std::string q = p + "/filter/" + std::to_string(k);
          const Json& cl = object(clauses[k], q, {"attr", "op", "value"}, {});
          string(cl, "attr", q);
          static const std::set<std::string> ops{"==", "!=", "<", "<=", ">", ">="};
          if (!cl["op"].is_string() || !ops.count(cl["op"].get<std::string>())) {
            fail(q + "/op", "expected one of == != < <= > >=");
          }
          const Json& v = cl["value"];
          if (!v.is_string() && !v.is_number() && !v.is_boolean()) {
            fail(q + "/value", "expected a string, number or boolean");
          }
        }
      }
    }

    for (std::size_t i = 0; d.contains("testsets") && i < list(d, "testsets", "").size(); ++i) {
      const std::string p = "/testsets/" + std::to_string(i);
      const Json& t = object(d["testsets"][i], p, {"name", "tests"}, {});
      unique(testsets, string(t, "name", p), p);
      const Json& tests = list(t, "tests", p);
      if (tests.empty()) fail(p + "/tests", "a test-set needs at least one test");
      for (std::size_t k = 0; k < tests.size(); ++k) {
        const std::string q = p + "/tests/" + std::to_string(k);
        const Json& test = object(tests[k], q, {"kind"}, {"params"});
        enumerated(test, "kind", q, &test_kind_from_string, "test kind");
        if (test.contains("params") && !test["params"].is_object()) {
          fail(q + "/params", "expected a mapping");
        }
      }
    }

    auto reference = [&](const Json& j, const std::string& key, const std::string& ptr,
                         const std::set<std::string>& names, const std::string& what) {
      const std::string s = string(j, key, ptr);
      if (!names.count(s)) fail(ptr + "/" + key, "no " + what + " named '" + s + "'");
    };

    for (std::size_t i = 0; d.contains("tasks") && i < list(d, "tasks", "").size(); ++i) {
      const std::string p = "/tasks/" + std::to_string(i);
      const Json& t = object(d["tasks"][i], p, {"testset", "cohort", "schedule"}, {});
      reference(t, "testset", p, testsets, "test-set");
      reference(t, "cohort", p, cohorts, "cohort");
      const std::string q = p + "/schedule";
      const Json& s = object(t["schedule"], q, {"mode", "window_start", "window_end"},
                             {"start_date", "end_date"});
      enumerated(s, "mode", q, &schedule_mode_from_string, "schedule mode");
      time_of_day(s, "window_start", q);
      time_of_day(s, "window_end", q);
      date(s, "start_date", q);
      date(s, "end_date", q);
    }

    for (std::size_t i = 0; d.contains("rules") && i < list(d, "rules", "").size(); ++i) {
      const std::string p = "/rules/" + std::to_string(i);
      const Json& r = object(d["rules"][i], p, {"name", "trigger", "predicate", "action"}, {"active"});
      unique(rules, string(r, "name", p), p);
      if (r.contains("active") && !r["active"].is_boolean()) fail(p + "/active", "expected a boolean");

      const std::string tp = p + "/trigger";
      const Json& trig = object(r["trigger"], tp, {"type", "worker_kind"}, {"time_of_day"});
      enumerated(trig, "type", tp, &trigger_type_from_string, "trigger type");
      string(trig, "worker_kind", tp);
      time_of_day(trig, "time_of_day", tp);

      const std::string pp = p + "/predicate";
      const Json& pred = object(r["predicate"], pp, {"metric", "comparator", "value"}, {});
      string(pred, "metric", pp);
      enumerated(pred, "comparator", pp, &comparator_from_string, "comparator");
      if (!pred["value"].is_number()) fail(pp + "/value", "expected a number");

      const std::string ap = p + "/action";
      const Json& act = object(r["action"], ap, {"testset", "sub_cohort", "source_cohort"},
                               {"window_start", "window_end", "day_offset"});
      reference(act, "testset", ap, testsets, "test-set");
      reference(act, "source_cohort", ap, cohorts, "cohort");
      string(act, "sub_cohort", ap);
      time_of_day(act, "window_start", ap);
      time_of_day(act, "window_end", ap);
      if (act.contains("day_offset") && !act["day_offset"].is_number_integer()) {
        fail(ap + "/day_offset", "expected an integer");
      }
    }
  }

 private:
  const Manifest& m_;
};

const Json& list_or_empty(const Json& doc, const char* key) {
  static const Json empty = Json::array();
  return doc.contains(key) ? doc[key] : empty;
}

// Runs one server call and tags any failure with the manifest location.
template <typename Fn>
auto located(const Manifest& m, const std::string& pointer, Fn fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), m.where(pointer, e.what()));
  }
}

std::map<std::string, std::string> by_name(const Json& items, const char* id_key) {
  std::map<std::string, std::string> out;
  for (const auto& it : items) {
    out.emplace(it.value("name", std::string()), it.at(id_key).get<std::string>());
  }
  return out;
}

}  // namespace

int Manifest::line_of(const std::string& pointer) const {
  // Fall back to the nearest enclosing node that has a line.
  std::string p = pointer;
  while (true) {
    auto it = lines.find(p);
    if (it != lines.end()) return it->second;
    if (p.empty()) return 0;
    p.erase(p.rfind('/'));
  }
}

std::string Manifest::where(const std::string& pointer, const std::string& message) const {
  return source + ":" + std::to_string(line_of(pointer)) + ": " + dotted(pointer) + ": " + message;
}

Manifest parse_manifest(const std::string& text, const std::string& source) {
  Manifest m;
  m.source = source;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::kValidation,
                source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  m.doc = convert(root, "", m);
  Checker(m).run();
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kValidation, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str(), path.string());
}

int ApplyReport::created_total() const {
  int n = 0;
  for (const auto& [kind, c] : counts) n += c.created;
  return n;
}

Json to_json(const ApplyReport& r) {
  Json counts = Json::object();
  for (const auto& [kind, c] : r.counts) counts[kind] = {{"created", c.created}, {"matched", c.matched}};
  Json j{{"study_id", r.study_id}, {"study", r.study_name}, {"counts", counts}, {"ids", r.ids}};
  if (r.researcher_token) j["researcher_token"] = *r.researcher_token;
  return j;
}

ApplyReport apply_manifest(const Manifest& m, const std::string& server_url,
                           const std::string& admin_token,
                           const std::optional<std::string>& researcher_token) {
  const Json& doc = m.doc;
  ApplyReport report;
  report.study_name = doc["study"].get<std::string>();
  for (const char* kind : {"study", "subjects", "cohorts", "testsets", "tasks", "rules"}) {
    report.counts[kind] = {};
    report.ids[kind] = Json::object();
  }

  net::HttpClient api(server_url);
  if (researcher_token) {
    api.set_token(*researcher_token);
    auto studies = located(m, "/study", [&] { return api.get("/v1/studies"); })["studies"];
    for (const auto& s : studies) {
      if (s["name"] == report.study_name) report.study_id = s["study_id"].get<std::string>();
    }
    if (report.study_id.empty()) {
      throw Error(ErrorCode::kForbidden,
                  m.where("/study", "token does not belong to study '" + report.study_name + "'"));
    }
    ++report.counts["study"].matched;
  } else {
    net::HttpClient admin(server_url, admin_token);
    auto out = located(m, "/study", [&] {
      try {
        return *admin.post("/v1/studies", {{"name", report.study_name}});
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kConflict) throw;
        throw Error(ErrorCode::kConflict,
                    std::string(e.what()) + "; pass the study's researcher token to update it");
      }
    });
    report.study_id = out["study"]["study_id"].get<std::string>();
    report.researcher_token = out["researcher_token"].get<std::string>();
    api.set_token(*report.researcher_token);
    ++report.counts["study"].created;
  }
  report.ids["study"][report.study_name] = report.study_id;
  const std::string base = "/v1/studies/" + report.study_id;

  // Subjects: enrollment is idempotent on raw_id server-side.
  std::map<std::string, std::string> subject_ids;
  const Json& subjects = list_or_empty(doc, "subjects");
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const std::string p = "/subjects/" + std::to_string(i);
    const Json& s = subjects[i];
    Json body{{"raw_id", s["raw_id"]}, {"attributes", s.value("attributes", Json::object())}};
    if (s.contains("device_id")) body["device_id"] = s["device_id"];
    auto out = located(m, p, [&] { return *api.post(base + "/subjects", body); });
    const std::string raw = s["raw_id"].get<std::string>();
    subject_ids[raw] = out["subject"]["subject_id"].get<std::string>();
    report.ids["subjects"][raw] = subject_ids[raw];
    ++(out["created"].get<bool>() ? report.counts["subjects"].created
                                  : report.counts["subjects"].matched);
  }

  auto cohort_ids = by_name(api.get(base + "/cohorts")["cohorts"], "cohort_id");
  const Json& cohorts = list_or_empty(doc, "cohorts");
  for (std::size_t i = 0; i < cohorts.size(); ++i) {
    const std::string p = "/cohorts/" + std::to_string(i);
    const Json& c = cohorts[i];
    const std::string name = c["name"].get<std::string>();
    if (!cohort_ids.count(name)) {
      Json selector;
      if (c.contains("filter")) {
        selector = {{"filter", c["filter"]}};
      } else {
        Json members = Json::array();
        for (const auto& raw : c["explicit"]) members.push_back(subject_ids.at(raw.get<std::string>()));
        selector = {{"explicit", members}};
      }
      auto out = located(m, p, [&] {
        return *api.post(base + "/cohorts", {{"name", name}, {"selector", selector}});
      });
      cohort_ids[name] = out["cohort_id"].get<std::string>();
      ++report.counts["cohorts"].created;
    } else {
      ++report.counts["cohorts"].matched;
    }
    report.ids["cohorts"][name] = cohort_ids[name];
  }

  auto testset_ids = by_name(api.get(base + "/testsets")["testsets"], "testset_id");
  const Json& testsets = list_or_empty(doc, "testsets");
  for (std::size_t i = 0; i < testsets.size(); ++i) {
    const std::string p = "/testsets/" + std::to_string(i);
    const std::string name = testsets[i]["name"].get<std::string>();
    if (!testset_ids.count(name)) {
      auto out = located(m, p, [&] {
        return *api.post(base + "/testsets", {{"name", name}, {"tests", testsets[i]["tests"]}});
      });
      testset_ids[name] = out["testset_id"].get<std::string>();
      ++report.counts["testsets"].created;
    } else {
      ++report.counts["testsets"].matched;
    }
    report.ids["testsets"][name] = testset_ids[name];
  }

  // Tasks have no name; (test-set, cohort, schedule) identifies them.
  const Json existing_tasks = api.get(base + "/tasks")["tasks"];
  const Json& tasks = list_or_empty(doc, "tasks");
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const std::string p = "/tasks/" + std::to_string(i);
    const Json& t = tasks[i];
    const std::string& ts = testset_ids.at(t["testset"].get<std::string>());
    const std::string& co = cohort_ids.at(t["cohort"].get<std::string>());
    const Json schedule = Json(t["schedule"].get<Schedule>());
    const std::string key = t["testset"].get<std::string>() + "@" + t["cohort"].get<std::string>() +
                            "#" + std::to_string(i);
    std::string task_id;
    for (const auto& e : existing_tasks) {
      if (e["testset_id"] == ts && e["cohort_id"] == co && e["schedule"] == schedule &&
          e["created_by"] == "manual") {
        task_id = e["task_id"].get<std::string>();
      }
    }
    if (task_id.empty()) {
      auto out = located(m, p, [&] {
        return *api.post(base + "/tasks",
                         {{"testset_id", ts}, {"cohort_id", co}, {"schedule", schedule}});
      });
      task_id = out["task"]["task_id"].get<std::string>();
      ++report.counts["tasks"].created;
    } else {
      ++report.counts["tasks"].matched;
    }
    report.ids["tasks"][key] = task_id;
  }

  auto rule_ids = by_name(api.get(base + "/rules")["rules"], "rule_id");
  const Json& rules = list_or_empty(doc, "rules");
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const std::string p = "/rules/" + std::to_string(i);
    const Json& r = rules[i];
    const std::string name = r["name"].get<std::string>();
    if (!rule_ids.count(name)) {
      const Json& a = r["action"];
      Json action{{"target_testset_id", testset_ids.at(a["testset"].get<std::string>())},
                  {"sub_cohort_name", a["sub_cohort"]},
                  {"source_cohort_id", cohort_ids.at(a["source_cohort"].get<std::string>())}};
      for (const char* k : {"window_start", "window_end", "day_offset"}) {
        if (a.contains(k)) action[k] = a[k];
      }
      Json body{{"name", name},
                {"trigger", r["trigger"]},
                {"predicate", r["predicate"]},
                {"action", action},
                {"active", r.value("active", true)}};
      auto out = located(m, p, [&] { return *api.post(base + "/rules", body); });
      rule_ids[name] = out["rule_id"].get<std::string>();
      ++report.counts["rules"].created;
    } else {
      ++report.counts["rules"].matched;
    }
    report.ids["rules"][name] = rule_ids[name];
  }
  return report;
}

}  // namespace hg::manifest
