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

#include "support.hpp"

#include <stdlib.h>

#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "gauntlet/sandbox.hpp"

namespace gauntlet::testing {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path fixture_binary() { return GAUNTLET_FIXTURE_PATH; }

TempDir::TempDir(const std::string& prefix) {
  std::string t = (fs::temp_directory_path() / (prefix + "XXXXXX")).string();
  if (!mkdtemp(t.data())) throw std::runtime_error("mkdtemp failed");
  path_ = t;
  fs::permissions(path_, fs::perms(0755));
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_file(const fs::path& p, const std::string& data, unsigned mode) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  write_executable_file(p, data, static_cast<mode_t>(mode));
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, zip::Member> fixture_members(const std::string& dir, const std::string& role) {
  std::map<std::string, zip::Member> m;
  const std::string bin = dir + "/gauntlet_fixture";
  const std::string run = dir + "/run.sh";
  m[bin] = {bin, read_file(fixture_binary()), 0755};
  m[run] = {run, "#!/bin/sh\nexec \"$(dirname \"$0\")/gauntlet_fixture\" " + role + " \"$@\"\n",
            0755};
  return m;
}

fs::path install_fixture(const fs::path& dir, const std::string& role) {
  fs::create_directories(dir);
  fs::permissions(dir, fs::perms(0755));
  for (const auto& [name, m] : fixture_members(".", role)) {
    write_file(dir / fs::path(name).filename(), m.data, m.mode);
  }
  return dir / "run.sh";
}

ChallengeConfig make_config(const ChallengeDef& def) {
  ChallengeConfig c;
  c.id = def.id;
  c.title = "Challenge " + def.id;
  c.description_html = "<p>" + def.id + "</p>";
  for (const auto& p : def.phases) {
    Phase phase;
    phase.id = "p-" + p;
    phase.name = p;
    phase.codename = p;
    phase.start = def.phase_start;
    phase.end = def.phase_end;
    phase.submission_limit_per_day = def.submission_limit_per_day;
    c.phases.push_back(phase);
  }
  for (const auto& s : def.splits) {
    DatasetSplit split;
    split.id = "s-" + s.codename;
    split.name = s.codename;
    split.codename = s.codename;
    split.item_count = s.item_count;
    if (!def.remote) split.annotation_ref = "annotations/" + s.codename + ".json";
    c.splits.push_back(split);
  }
  for (const auto& p : def.phases) {
    for (const auto& s : def.splits) {
      c.phase_splits.push_back({"p-" + p, "s-" + s.codename, s.visibility, def.schema});
    }
  }
  if (!def.remote) c.evaluator.entrypoint = "eval/run.sh";
  c.evaluator.chunkable = def.chunkable;
  c.evaluator.wall_seconds = 120;
  c.default_metric = def.schema.front();
  for (const auto& m : def.schema) c.metrics[m].higher_is_better = m != "error_rate";
  c.remote_evaluation = def.remote;
  return c;
}

std::string make_bundle(const ChallengeConfig& config, std::map<std::string, zip::Member> members) {
  Bundle b;
  b.config = config;
  b.members = std::move(members);
  return serialize_bundle(b);
}

std::string make_bundle(const ChallengeDef& def,
                        const std::map<std::string, std::vector<int>>& labels) {
  const ChallengeConfig c = make_config(def);
  std::map<std::string, zip::Member> members;
  if (!def.remote) {
    members = fixture_members("eval", def.evaluator_role);
    for (const auto& s : def.splits) {
      const std::string name = "annotations/" + s.codename + ".json";
      auto it = labels.find(s.codename);
      members[name] = {name, json(it == labels.end() ? std::vector<int>(s.item_count, 0)
                                                     : it->second).dump()};
    }
  }
  return make_bundle(c, std::move(members));
}

std::vector<int> random_labels(std::size_t n, std::uint64_t seed, int classes) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(0, classes - 1);
  std::vector<int> out(n);
  for (auto& v : out) v = d(rng);
  return out;
}

std::string predictions(const std::map<std::string, std::vector<int>>& by_split) {
  json j = json::object();
  for (const auto& [split, labels] : by_split) j[split] = labels;
  return j.dump();
}

std::string make_agent_archive(const AgentDef& def) {
  zip::Writer w;
  json manifest{{"entrypoint", "run.sh"}, {"schema_version", 1}};
  if (def.snapshot) manifest["snapshot"] = def.snapshot->first;
  w.add("agent.json", manifest.dump());
  std::string args;
  for (const auto& a : def.role_args) args += " \"/agent/" + a + "\"";
  w.add("run.sh", "#!/bin/sh\nexec /agent/gauntlet_fixture " + def.role + args + "\n", 0755);
  w.add("gauntlet_fixture", read_file(fixture_binary()), 0755);
  for (const auto& [name, data] : def.files) w.add(name, data);
  if (def.snapshot) w.add(def.snapshot->first, def.snapshot->second);
  return w.finish();
}

std::string make_agent_bundle(const std::string& id, const std::vector<GridEpisode>& episodes,
                              std::int64_t max_steps) {
  ChallengeDef def;
  def.id = id;
  def.splits = {{"val", static_cast<std::int64_t>(episodes.size())}};
  def.evaluator_role = "success-rate";
  def.chunkable = false;
  def.schema = {"success_rate", "mean_steps"};
  ChallengeConfig c = make_config(def);
  c.evaluator.kind = EvaluatorKind::kAgent;
  c.metrics["mean_steps"].higher_is_better = false;
  EnvironmentSpec env;
  env.env_id = "grid";
  env.assets_ref = "envs/grid/";
  env.entrypoint = "env/run.sh";
  env.max_steps_per_episode = max_steps;
  env.action_vocabulary = {"move-forward", "turn-left", "turn-right", "stop"};
  for (const auto& e : episodes) env.episodes.push_back(e.id);
  c.splits[0].environment = env;

  auto members = fixture_members("eval", "success-rate");
  for (auto& [k, v] : fixture_members("env", "grid-env")) members[k] = v;
  const std::string ann = "annotations/val.json";
  members[ann] = {ann, "[]"};
  for (const auto& e : episodes) {
    const std::string name = "envs/grid/" + e.id + ".json";
    members[name] = {name, json{{"start", {e.sx, e.sy}},
                                {"heading", e.heading},
                                {"goal", {e.gx, e.gy}},
                                {"question", e.question},
                                {"answer", e.answer},
                                {"secret", e.secret}}
                               .dump()};
  }
  return make_bundle(c, std::move(members));
}

std::string make_hitl_bundle(const std::string& id, std::int64_t rounds,
                             std::vector<std::string> axes, std::int64_t sessions,
                             std::int64_t ttl_seconds) {
  ChallengeDef def;
  def.id = id;
  def.splits = {{"human", 1}};
  def.schema = axes;
  ChallengeConfig c = make_config(def);
  c.splits[0].annotation_ref.reset();
  c.evaluator.kind = EvaluatorKind::kHitl;
  c.evaluator.entrypoint.clear();
  HitlConfig h;
  h.instructions_html = "<p>Chat with the bot, then rate each answer.</p>";
  h.rating_axes = std::move(axes);
  h.rounds_required = rounds;
  h.sessions_per_submission = sessions;
  h.ttl_seconds = ttl_seconds;
  c.hitl = h;
  return make_bundle(c, {});
}

}  // namespace gauntlet::testing
