// Copyright 2026 The Gauntlet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gauntlet/bundle.hpp"

#include <algorithm>
#include <set>

#include "gauntlet/error.hpp"

namespace gauntlet {

using nlohmann::json;

namespace {

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::kSchemaError, path + ": " + what,
              {{"path", path}, {"message", what}});
}

std::string at(const std::string& path, const std::string& field) {
  return path.empty() ? field : path + "." + field;
}

std::string idx(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

const json& require(const json& obj, const std::string& path, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end()) schema_error(at(path, field), "required");
  return *it;
}

void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) schema_error(path.empty() ? "$" : path, "must be an object");
}

std::string get_string(const json& obj, const std::string& path, const char* field,
                       std::optional<std::string> fallback = std::nullopt) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) {
    if (fallback) return *fallback;
    schema_error(at(path, field), "required");
  }
  if (!it->is_string()) schema_error(at(path, field), "must be a string");
  return it->get<std::string>();
}

std::optional<std::string> get_opt_string(const json& obj, const std::string& path,
                                          const char* field) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) schema_error(at(path, field), "must be a string");
  return it->get<std::string>();
}

std::int64_t get_int(const json& obj, const std::string& path, const char* field,
                     std::optional<std::int64_t> fallback = std::nullopt) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) {
    if (fallback) return *fallback;
    schema_error(at(path, field), "required");
  }
  if (!it->is_number_integer()) schema_error(at(path, field), "must be an integer");
  return it->get<std::int64_t>();
}

bool get_bool(const json& obj, const std::string& path, const char* field, bool fallback) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) return fallback;
  if (!it->is_boolean()) schema_error(at(path, field), "must be a boolean");
  return it->get<bool>();
}

const json& get_array(const json& obj, const std::string& path, const char* field,
                      bool required) {
  static const json kEmpty = json::array();
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) {
    if (required) schema_error(at(path, field), "required");
    return kEmpty;
  }
  if (!it->is_array()) schema_error(at(path, field), "must be an array");
  return *it;
}

std::vector<std::string> get_string_list(const json& obj, const std::string& path,
                                         const char* field) {
  std::vector<std::string> out;
  const auto& arr = get_array(obj, path, field, false);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_string()) schema_error(idx(at(path, field), i), "must be a string");
    out.push_back(arr[i].get<std::string>());
  }
  return out;
}

Timestamp get_time(const json& obj, const std::string& path, const char* field) {
  const auto text = get_string(obj, path, field);
  auto t = parse_timestamp(text);
  if (!t) schema_error(at(path, field), "must be an ISO-8601 UTC timestamp");
  return *t;
}

Phase phase_from_json(const json& j, const std::string& path) {
  expect_object(j, path);
  Phase p;
  p.id = get_string(j, path, "id");
  p.codename = get_string(j, path, "codename", p.id);
  p.name = get_string(j, path, "name", p.codename);
  p.start = get_time(j, path, "start");
  if (auto it = j.find("end"); it != j.end() && !it->is_null()) {
    p.end = get_time(j, path, "end");
  }
  p.submission_limit_per_day = get_int(j, path, "submission_limit_per_day");
  if (p.submission_limit_per_day < 0) {
    schema_error(at(path, "submission_limit_per_day"), "must be non-negative");
  }
  return p;
}

EnvironmentSpec environment_from_json(const json& j, const std::string& path) {
  expect_object(j, path);
  EnvironmentSpec e;
  e.env_id = get_string(j, path, "env_id");
  e.assets_ref = get_string(j, path, "assets");
  e.entrypoint = get_string(j, path, "entrypoint");
  e.episodes = get_string_list(j, path, "episodes");
  e.max_steps_per_episode = get_int(j, path, "max_steps_per_episode");
  e.action_vocabulary = get_string_list(j, path, "action_vocabulary");
  return e;
}

DatasetSplit split_from_json(const json& j, const std::string& path) {
  expect_object(j, path);
  DatasetSplit s;
  s.id = get_string(j, path, "id");
  s.codename = get_string(j, path, "codename", s.id);
  s.name = get_string(j, path, "name", s.codename);
  s.annotation_ref = get_opt_string(j, path, "annotations");
  s.item_count = get_int(j, path, "item_count", 0);
  if (s.item_count < 0) schema_error(at(path, "item_count"), "must be non-negative");
  if (auto it = j.find("environment"); it != j.end() && !it->is_null()) {
    s.environment = environment_from_json(*it, at(path, "environment"));
  }
  return s;
}

PhaseSplit phase_split_from_json(const json& j, const std::string& path) {
  expect_object(j, path);
  PhaseSplit ps;
  ps.phase_id = get_string(j, path, "phase_id");
  ps.split_id = get_string(j, path, "split_id");
  const auto vis = get_string(j, path, "visibility", std::string("public"));
  auto v = parse_visibility(vis);
  if (!v) schema_error(at(path, "visibility"), "must be one of public, host_only, owner_only");
  ps.leaderboard_visibility = *v;
  ps.leaderboard_schema = get_string_list(j, path, "leaderboard");
  return ps;
}

EvaluatorSpec evaluator_from_json(const json& j, const std::string& path) {
  expect_object(j, path);
  EvaluatorSpec e;
  const auto kind = get_string(j, path, "kind");
  auto k = parse_evaluator_kind(kind);
  if (!k) schema_error(at(path, "kind"), "must be one of predictions, agent, hitl");
  e.kind = *k;
  e.entrypoint = get_string(j, path, "entrypoint", std::string());
  e.warmup_assets = get_string_list(j, path, "warmup_assets");
  e.chunkable = get_bool(j, path, "chunkable", false);
  e.cpu_seconds = get_int(j, path, "cpu_seconds", e.cpu_seconds);
  e.memory_bytes = get_int(j, path, "memory_bytes", e.memory_bytes);
  e.wall_seconds = get_int(j, path, "wall_seconds", e.wall_seconds);
  if (e.cpu_seconds <= 0) schema_error(at(path, "cpu_seconds"), "must be positive");
  if (e.memory_bytes <= 0) schema_error(at(path, "memory_bytes"), "must be positive");
  if (e.wall_seconds <= 0) schema_error(at(path, "wall_seconds"), "must be positive");
  return e;
}

HitlConfig hitl_from_json(const json& j, const std::string& path) {
  expect_object(j, path);
  HitlConfig h;
  h.instructions_html = get_string(j, path, "instructions_html", std::string());
  h.rating_axes = get_string_list(j, path, "rating_axes");
  h.rounds_required = get_int(j, path, "rounds_required");
  for (auto& w : get_string_list(j, path, "whitelist")) h.whitelist.insert(std::move(w));
  for (auto& b : get_string_list(j, path, "blocklist")) h.blocklist.insert(std::move(b));
  h.qualification_test_ref = get_opt_string(j, path, "qualification_test");
  if (auto it = j.find("rating_scale"); it != j.end() && !it->is_null()) {
    const auto sp = at(path, "rating_scale");
    expect_object(*it, sp);
    h.scale.min = static_cast<int>(get_int(*it, sp, "min", 1));
    h.scale.max = static_cast<int>(get_int(*it, sp, "max", 5));
    if (h.scale.min > h.scale.max) schema_error(sp, "min must not exceed max");
  }
  h.sessions_per_submission = get_int(j, path, "sessions_per_submission", 1);
  if (h.sessions_per_submission < 1) {
    schema_error(at(path, "sessions_per_submission"), "must be positive");
  }
  h.ttl_seconds = get_int(j, path, "ttl_seconds", 1800);
  if (h.ttl_seconds <= 0) schema_error(at(path, "ttl_seconds"), "must be positive");
  return h;
}

}  // namespace

std::string to_string(const Violation& v) { return v.path + ": " + v.message; }

std::vector<const zip::Member*> Bundle::members_under(const std::string& prefix) const {
  std::vector<const zip::Member*> out;
  std::string dir = prefix;
  if (!dir.empty() && dir.back() != '/') dir.push_back('/');
  for (auto it = members.lower_bound(dir); it != members.end(); ++it) {
    if (it->first.compare(0, dir.size(), dir) != 0) break;
    out.push_back(&it->second);
  }
  return out;
}

ChallengeConfig manifest_from_json(const json& m) {
  expect_object(m, "");
  const auto version = get_int(m, "", "schema_version");
  if (version != kManifestSchemaVersion) {
    schema_error("schema_version", "unsupported version " + std::to_string(version));
  }
  ChallengeConfig c;
  c.id = get_string(m, "", "id");
  c.title = get_string(m, "", "title", c.id);
  c.description_html = get_string(m, "", "description_html", std::string());
  c.default_metric = get_string(m, "", "default_metric");
  c.remote_evaluation = get_bool(m, "", "remote_evaluation", false);

  const auto& phases = get_array(m, "", "phases", false);
  for (std::size_t i = 0; i < phases.size(); ++i) {
    c.phases.push_back(phase_from_json(phases[i], idx("phases", i)));
  }
  const auto& splits = get_array(m, "", "splits", false);
  for (std::size_t i = 0; i < splits.size(); ++i) {
    c.splits.push_back(split_from_json(splits[i], idx("splits", i)));
  }
  const auto& pss = get_array(m, "", "phase_splits", false);
  for (std::size_t i = 0; i < pss.size(); ++i) {
    c.phase_splits.push_back(phase_split_from_json(pss[i], idx("phase_splits", i)));
  }
  c.evaluator = evaluator_from_json(require(m, "", "evaluator"), "evaluator");

  if (auto it = m.find("metrics"); it != m.end() && !it->is_null()) {
    expect_object(*it, "metrics");
    for (const auto& [name, spec] : it->items()) {
      const auto path = "metrics." + name;
      expect_object(spec, path);
      c.metrics[name].higher_is_better = get_bool(spec, path, "higher_is_better", true);
    }
  }
  if (auto it = m.find("hitl"); it != m.end() && !it->is_null()) {
    c.hitl = hitl_from_json(*it, "hitl");
  }
  return c;
}

json manifest_to_json(const ChallengeConfig& c) {
  json m;
  m["schema_version"] = kManifestSchemaVersion;
  m["id"] = c.id;
  m["title"] = c.title;
  m["description_html"] = c.description_html;
  m["default_metric"] = c.default_metric;
  m["remote_evaluation"] = c.remote_evaluation;

  m["phases"] = json::array();
  for (const auto& p : c.phases) {
    json jp{{"id", p.id},
            {"name", p.name},
            {"codename", p.codename},
            {"start", format_timestamp(p.start)},
            {"end", p.end ? json(format_timestamp(*p.end)) : json(nullptr)},
            {"submission_limit_per_day", p.submission_limit_per_day}};
    m["phases"].push_back(std::move(jp));
  }
  m["splits"] = json::array();
  for (const auto& s : c.splits) {
    json js{{"id", s.id},
            {"name", s.name},
            {"codename", s.codename},
            {"annotations", s.annotation_ref ? json(*s.annotation_ref) : json(nullptr)},
            {"item_count", s.item_count}};
    if (s.environment) {
      const auto& e = *s.environment;
      js["environment"] = {{"env_id", e.env_id},
                           {"assets", e.assets_ref},
                           {"entrypoint", e.entrypoint},
                           {"episodes", e.episodes},
                           {"max_steps_per_episode", e.max_steps_per_episode},
                           {"action_vocabulary", e.action_vocabulary}};
    }
    m["splits"].push_back(std::move(js));
  }
  m["phase_splits"] = json::array();
  for (const auto& ps : c.phase_splits) {
    m["phase_splits"].push_back({{"phase_id", ps.phase_id},
                                 {"split_id", ps.split_id},
                                 {"visibility", to_string(ps.leaderboard_visibility)},
                                 {"leaderboard", ps.leaderboard_schema}});
  }
  const auto& e = c.evaluator;
  m["evaluator"] = {{"kind", to_string(e.kind)},
                    {"entrypoint", e.entrypoint},
                    {"warmup_assets", e.warmup_assets},
                    {"chunkable", e.chunkable},
                    {"cpu_seconds", e.cpu_seconds},
                    {"memory_bytes", e.memory_bytes},
                    {"wall_seconds", e.wall_seconds}};
  json metrics = json::object();
  for (const auto& [name, dir] : c.metrics) {
    metrics[name] = {{"higher_is_better", dir.higher_is_better}};
  }
  m["metrics"] = std::move(metrics);
  if (c.hitl) {
    const auto& h = *c.hitl;
    m["hitl"] = {{"instructions_html", h.instructions_html},
                 {"rating_axes", h.rating_axes},
                 {"rounds_required", h.rounds_required},
                 {"whitelist", h.whitelist},
                 {"blocklist", h.blocklist},
                 {"qualification_test",
                  h.qualification_test_ref ? json(*h.qualification_test_ref) : json(nullptr)},
                 {"rating_scale", {{"min", h.scale.min}, {"max", h.scale.max}}},
                 {"sessions_per_submission", h.sessions_per_submission},
                 {"ttl_seconds", h.ttl_seconds}};
  } else {
    m["hitl"] = nullptr;
  }
  return m;
}

Bundle read_bundle(std::string_view archive) {
  auto members = zip::read_archive(archive);
  Bundle b;
  for (auto& m : members) {
    auto name = m.name;
    b.members.insert_or_assign(std::move(name), std::move(m));
  }
  auto it = b.members.find(std::string(kManifestName));
  if (it == b.members.end()) {
    throw Error(ErrorCode::kMalformedArchive,
                "bundle has no " + std::string(kManifestName) + " at its root");
  }
  if (it->second.data.size() > kMaxManifestBytes) {
    throw Error(ErrorCode::kPayloadTooLarge, "manifest exceeds 1 MiB");
  }
  json manifest = json::parse(it->second.data, nullptr, false);
  if (manifest.is_discarded()) {
    throw Error(ErrorCode::kSchemaError, "$: manifest is not valid JSON",
                {{"path", "$"}, {"message", "manifest is not valid JSON"}});
  }
  b.config = manifest_from_json(manifest);
  return b;
}

std::vector<Violation> validate_config(const ChallengeConfig& c) {
  std::vector<Violation> out;
  auto add = [&out](std::string path, std::string msg) {
    out.push_back({std::move(path), std::move(msg)});
  };

  if (c.phases.empty()) add("phases", "must be non-empty");
  if (c.splits.empty()) add("splits", "must be non-empty");

  std::set<std::string> phase_ids, phase_codes;
  for (std::size_t i = 0; i < c.phases.size(); ++i) {
    const auto& p = c.phases[i];
    const auto base = idx("phases", i);
    if (!phase_ids.insert(p.id).second) add(base + ".id", "duplicate phase id '" + p.id + "'");
    if (!phase_codes.insert(p.codename).second) {
      add(base + ".codename", "duplicate phase codename '" + p.codename + "'");
    }
    if (p.end && *p.end < p.start) add(base + ".end", "must not precede start");
  }

  std::set<std::string> split_ids, split_codes;
  for (std::size_t i = 0; i < c.splits.size(); ++i) {
    const auto& s = c.splits[i];
    const auto base = idx("splits", i);
    if (!split_ids.insert(s.id).second) add(base + ".id", "duplicate split id '" + s.id + "'");
    if (!split_codes.insert(s.codename).second) {
      add(base + ".codename", "duplicate split codename '" + s.codename + "'");
    }
    if (c.remote_evaluation && s.annotation_ref) {
      add(base + ".annotations", "must be absent for remotely evaluated challenges");
    }
    if (!c.remote_evaluation && !s.annotation_ref &&
        c.evaluator.kind != EvaluatorKind::kHitl) {
      add(base + ".annotations", "required for locally evaluated challenges");
    }
    if (c.evaluator.kind == EvaluatorKind::kAgent) {
      if (!s.environment) {
        add(base + ".environment", "required for agent challenges");
      } else {
        const auto& e = *s.environment;
        if (e.episodes.empty()) add(base + ".environment.episodes", "must be non-empty");
        if (e.action_vocabulary.empty()) {
          add(base + ".environment.action_vocabulary", "must be non-empty");
        }
        if (e.max_steps_per_episode <= 0) {
          add(base + ".environment.max_steps_per_episode", "must be positive");
        }
      }
    }
  }

  std::set<std::pair<std::string, std::string>> pairs;
  for (std::size_t i = 0; i < c.phase_splits.size(); ++i) {
    const auto& ps = c.phase_splits[i];
    const auto base = idx("phase_splits", i);
    if (!c.find_phase(ps.phase_id)) {
      add(base + ".phase_id", "references unknown phase '" + ps.phase_id + "'");
    }
    if (!c.find_split(ps.split_id)) {
      add(base + ".split_id", "references unknown split '" + ps.split_id + "'");
    }
    if (!pairs.insert({ps.phase_id, ps.split_id}).second) {
      add(base, "duplicate phase/split pair (" + ps.phase_id + ", " + ps.split_id + ")");
    }
    if (ps.leaderboard_schema.empty()) {
      add(base + ".leaderboard", "must be non-empty");
    } else if (std::find(ps.leaderboard_schema.begin(), ps.leaderboard_schema.end(),
                         c.default_metric) == ps.leaderboard_schema.end()) {
      add(base + ".leaderboard", "missing default metric '" + c.default_metric + "'");
    }
  }

  if (c.evaluator.kind != EvaluatorKind::kHitl && c.evaluator.entrypoint.empty() &&
      !c.remote_evaluation) {
    add("evaluator.entrypoint", "required");
  }
  if (c.evaluator.kind == EvaluatorKind::kHitl && !c.hitl) {
    add("evaluator.kind", "hitl evaluator requires a hitl section");
  }
  if (c.hitl) {
    const auto& h = *c.hitl;
    std::vector<std::string> both;
    std::set_intersection(h.whitelist.begin(), h.whitelist.end(), h.blocklist.begin(),
                          h.blocklist.end(), std::back_inserter(both));
    if (!both.empty()) {
      std::string names;
      for (const auto& w : both) names += (names.empty() ? "" : ", ") + w;
      add("hitl.whitelist", "evaluators on both whitelist and blocklist: " + names);
    }
    if (h.rating_axes.empty()) add("hitl.rating_axes", "must be non-empty");
    if (h.rounds_required <= 0) add("hitl.rounds_required", "must be positive");
  }

  std::stable_sort(out.begin(), out.end(),
                   [](const Violation& a, const Violation& b) { return a.path < b.path; });
  return out;
}

std::vector<Violation> validate_bundle(const Bundle& b) {
  auto out = validate_config(b.config);
  const auto& c = b.config;
  auto need = [&](const std::string& path, const std::string& member) {
    if (!b.has_member(member)) out.push_back({path, "bundle has no member '" + member + "'"});
  };
  if (!c.evaluator.entrypoint.empty()) need("evaluator.entrypoint", c.evaluator.entrypoint);
  for (std::size_t i = 0; i < c.evaluator.warmup_assets.size(); ++i) {
    need(idx("evaluator.warmup_assets", i), c.evaluator.warmup_assets[i]);
  }
  for (std::size_t i = 0; i < c.splits.size(); ++i) {
    const auto& s = c.splits[i];
    if (s.annotation_ref) need(idx("splits", i) + ".annotations", *s.annotation_ref);
    if (s.environment) {
      need(idx("splits", i) + ".environment.entrypoint", s.environment->entrypoint);
      if (b.members_under(s.environment->assets_ref).empty()) {
        out.push_back({idx("splits", i) + ".environment.assets",
                       "bundle has no members under '" + s.environment->assets_ref + "'"});
      }
    }
  }
  if (c.hitl && c.hitl->qualification_test_ref) {
    need("hitl.qualification_test", *c.hitl->qualification_test_ref);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Violation& a, const Violation& b) { return a.path < b.path; });
  return out;
}

std::vector<Violation> config_notices(const ChallengeConfig& c) {
  std::vector<Violation> out;
  std::map<std::string, std::set<Visibility>> seen;
  for (const auto& ps : c.phase_splits) seen[ps.split_id].insert(ps.leaderboard_visibility);
  for (const auto& [split, vis] : seen) {
    if (vis.size() > 1) {
      out.push_back({"phase_splits", "split '" + split +
                                         "' is shared by phases with different visibility"});
    }
  }
  return out;
}

Bundle parse_bundle(std::string_view archive) {
  Bundle b = read_bundle(archive);
  auto violations = validate_bundle(b);
  if (!violations.empty()) {
    json list = json::array();
    for (const auto& v : violations) list.push_back({{"path", v.path}, {"message", v.message}});
    throw Error(ErrorCode::kSchemaError, to_string(violations.front()),
                {{"path", violations.front().path}, {"violations", std::move(list)}});
  }
  return b;
}

std::string serialize_bundle(const Bundle& b) {
  zip::Writer w;
  w.add(std::string(kManifestName), manifest_to_json(b.config).dump(2));
  for (const auto& [name, m] : b.members) {
    if (name == kManifestName) continue;
    w.add(name, m.data, m.mode);
  }
  return w.finish();
}

const PhaseSplit& resolve_phase_split(const ChallengeConfig& c,
                                      std::string_view phase_codename,
                                      std::string_view split_codename) {
  if (phase_codename.empty() || split_codename.empty()) {
    throw Error(ErrorCode::kBadRequest, "phase and split codenames must be non-empty");
  }
  const PhaseSplit* found = nullptr;
  int matches = 0;
  for (const auto& ps : c.phase_splits) {
    const Phase* p = c.find_phase(ps.phase_id);
    const DatasetSplit* s = c.find_split(ps.split_id);
    if (p && s && p->codename == phase_codename && s->codename == split_codename) {
      found = &ps;
      ++matches;
    }
  }
  if (matches == 0) {
    throw Error(ErrorCode::kNotFound, "no phase-split (" + std::string(phase_codename) +
                                          ", " + std::string(split_codename) + ")");
  }
  if (matches > 1) {
    throw Error(ErrorCode::kAmbiguous, "phase-split (" + std::string(phase_codename) + ", " +
                                           std::string(split_codename) +
                                           ") matches more than one entry");
  }
  return *found;
}

}  // namespace gauntlet
