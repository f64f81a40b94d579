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

#include "gauntlet/hitl.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "gauntlet/error.hpp"

namespace gauntlet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kStateNames[] = {"Open", "Paired", "Interrupted", "Completed",
                                            "Expired"};

bool live(SessionState s) {
  return s == SessionState::kOpen || s == SessionState::kPaired ||
         s == SessionState::kInterrupted;
}

void write_atomic(const fs::path& path, const std::string& data) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << data;
    out.flush();
    if (!out) throw Error(ErrorCode::kInternal, "cannot write " + path.string());
  }
  fs::rename(tmp, path);
}

json message_json(const HitlMessage& m) {
  return {{"sender", m.sender}, {"round", m.round}, {"body", m.body},
          {"sent_at", format_timestamp(m.sent_at)}};
}

json transcript_json(const std::vector<HitlMessage>& t) {
  json a = json::array();
  for (const auto& m : t) a.push_back(message_json(m));
  return a;
}

json ratings_json(const std::map<std::string, std::map<std::int64_t, int>>& r) {
  json j = json::object();
  for (const auto& [axis, rounds] : r) {
    json a = json::object();
    for (const auto& [round, v] : rounds) a[std::to_string(round)] = v;
    j[axis] = std::move(a);
  }
  return j;
}

json error_frame(const Error& e) {
  return {{"type", "error"}, {"code", code_name(e.code())}, {"message", e.what()}};
}

}  // namespace

std::string_view to_string(SessionState s) { return kStateNames[static_cast<int>(s)]; }

std::optional<SessionState> parse_session_state(std::string_view s) {
  for (std::size_t i = 0; i < std::size(kStateNames); ++i) {
    if (kStateNames[i] == s) return static_cast<SessionState>(i);
  }
  return std::nullopt;
}

json to_json(const HitlSession& s) {
  return {{"session_id", s.session_id},
          {"submission_id", s.submission_id},
          {"challenge_id", s.challenge_id},
          {"slot", s.slot},
          {"evaluator_id", s.evaluator_id ? json(*s.evaluator_id) : json()},
          {"state", to_string(s.state)},
          {"round_count", s.round_count},
          {"transcript", transcript_json(s.transcript)},
          {"ratings", ratings_json(s.ratings)},
          {"opened_at", format_timestamp(s.opened_at)},
          {"last_activity", format_timestamp(s.last_activity)},
          {"ttl_seconds", s.ttl_seconds},
          {"connection", s.connection},
          {"outcome", s.outcome},
          {"replaced_by", s.replaced_by ? json(*s.replaced_by) : json()}};
}

HitlSession hitl_session_from_json(const json& j) {
  HitlSession s;
  s.session_id = j.at("session_id").get<std::string>();
  s.submission_id = j.at("submission_id").get<std::string>();
  s.challenge_id = j.value("challenge_id", "");
  s.slot = j.value("slot", std::int64_t{0});
  if (j.contains("evaluator_id") && j["evaluator_id"].is_string()) {
    s.evaluator_id = j["evaluator_id"].get<std::string>();
  }
  auto state = parse_session_state(j.at("state").get<std::string>());
  if (!state) throw Error(ErrorCode::kInternal, "bad session state in " + s.session_id);
  s.state = *state;
  s.round_count = j.value("round_count", std::int64_t{0});
  for (const auto& m : j.at("transcript")) {
    HitlMessage msg;
    msg.sender = m.at("sender").get<std::string>();
    msg.round = m.at("round").get<std::int64_t>();
    msg.body = m.at("body").get<std::string>();
    msg.sent_at = parse_timestamp(m.value("sent_at", "")).value_or(Timestamp{});
    s.transcript.push_back(std::move(msg));
  }
  const json ratings = j.value("ratings", json::object());
  for (const auto& [axis, rounds] : ratings.items()) {
    for (const auto& [round, v] : rounds.items()) {
      s.ratings[axis][std::stoll(round)] = v.get<int>();
    }
  }
  s.opened_at = parse_timestamp(j.value("opened_at", "")).value_or(Timestamp{});
  s.last_activity = parse_timestamp(j.value("last_activity", "")).value_or(s.opened_at);
  s.ttl_seconds = j.value("ttl_seconds", std::int64_t{1800});
  s.connection = j.value("connection", std::int64_t{0});
  s.outcome = j.value("outcome", "");
  if (j.contains("replaced_by") && j["replaced_by"].is_string()) {
    s.replaced_by = j["replaced_by"].get<std::string>();
  }
  return s;
}

json to_json(const EvaluatorProfile& p) {
  return {{"evaluator_id", p.evaluator_id},
          {"qualification_passed", p.qualification_passed},
          {"completed", p.completed},
          {"abandoned", p.abandoned}};
}

struct HitlBroker::Slot {
  std::mutex mu;
  HitlSession s;
  std::unique_ptr<StagedAgent> agent;
  std::unique_ptr<AgentInstance> instance;

  void teardown() {
    if (instance) instance->shutdown();
    instance.reset();
    agent.reset();
  }
};

HitlBroker::HitlBroker(const Clock& clock, BlobStore& blobs, HitlHost& host, HitlOptions options)
    : clock_(clock), blobs_(blobs), host_(host), options_(std::move(options)) {
  if (options_.state_dir.empty()) throw Error(ErrorCode::kBadRequest, "HITL state_dir is required");
  if (options_.work_root.empty()) options_.work_root = options_.state_dir / "agents";
  fs::create_directories(options_.state_dir / "sessions");
  fs::create_directories(options_.work_root);
}

HitlBroker::~HitlBroker() {
  for (auto& [id, slot] : slots_) {
    std::lock_guard lock(slot->mu);
    slot->teardown();
  }
}

void HitlBroker::recover() {
  std::vector<HitlSession> loaded;
  for (const auto& e : fs::directory_iterator(options_.state_dir / "sessions")) {
    if (e.path().extension() != ".json") continue;
    std::ifstream in(e.path());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) continue;
    loaded.push_back(hitl_session_from_json(j));
  }
  std::set<std::string> submissions;
  {
    std::lock_guard lock(mu_);
    std::ifstream in(options_.state_dir / "evaluators.json");
    if (in) {
      json j = json::parse(in, nullptr, false);
      if (j.is_array()) {
        for (const auto& p : j) {
          EvaluatorProfile prof{p.at("evaluator_id").get<std::string>(),
                                p.value("qualification_passed", false),
                                p.value("completed", std::int64_t{0}),
                                p.value("abandoned", std::int64_t{0})};
          evaluators_[prof.evaluator_id] = prof;
        }
      }
    }
    for (auto& s : loaded) {
      if (slots_.contains(s.session_id)) continue;
      if (s.state == SessionState::kPaired) s.state = SessionState::kInterrupted;
      auto slot = std::make_unique<Slot>();
      slot->s = s;
      Summary& sum = summaries_[s.submission_id][s.session_id];
      sum.slot = s.slot;
      sum.state = s.state;
      if (s.state == SessionState::kCompleted) sum.means = session_means(s);
      submissions.insert(s.submission_id);
      slots_.emplace(s.session_id, std::move(slot));
    }
  }
  for (const auto& s : loaded) {
    if (s.state == SessionState::kPaired) {
      auto copy = s;
      copy.state = SessionState::kInterrupted;
      persist(copy);
    }
  }
  for (const auto& sid : submissions) {
    try {
      maybe_record(sid);
    } catch (const std::exception&) {
      // the submission store may not know it any more
    }
  }
}

void HitlBroker::register_evaluator(const EvaluatorProfile& profile) {
  std::lock_guard lock(mu_);
  auto& p = evaluators_[profile.evaluator_id];
  const auto completed = p.completed;
  const auto abandoned = p.abandoned;
  p = profile;
  if (p.completed == 0) p.completed = completed;
  if (p.abandoned == 0) p.abandoned = abandoned;
  save_evaluators_locked();
}

std::optional<EvaluatorProfile> HitlBroker::evaluator(const std::string& evaluator_id) const {
  std::lock_guard lock(mu_);
  auto it = evaluators_.find(evaluator_id);
  if (it == evaluators_.end()) return std::nullopt;
  return it->second;
}

void HitlBroker::save_evaluators_locked() const {
  json a = json::array();
  for (const auto& [id, p] : evaluators_) a.push_back(to_json(p));
  write_atomic(options_.state_dir / "evaluators.json", a.dump());
}

void HitlBroker::persist(const HitlSession& s) const {
  write_atomic(options_.state_dir / "sessions" / (s.session_id + ".json"), to_json(s).dump());
}

HitlBroker::Slot* HitlBroker::find(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  auto it = slots_.find(session_id);
  return it == slots_.end() ? nullptr : it->second.get();
}

HitlBroker::Slot& HitlBroker::get(const std::string& session_id) const {
  Slot* slot = find(session_id);
  if (!slot) throw Error(ErrorCode::kNotFound, "no session " + session_id);
  return *slot;
}

HitlSubmission HitlBroker::info_for(const std::string& submission_id) {
  {
    std::lock_guard lock(mu_);
    auto it = submissions_.find(submission_id);
    if (it != submissions_.end()) return it->second;
  }
  HitlSubmission info = host_.hitl_submission(submission_id);
  std::lock_guard lock(mu_);
  return submissions_.try_emplace(submission_id, std::move(info)).first->second;
}

void HitlBroker::note_state(const HitlSession& s) {
  std::lock_guard lock(mu_);
  Summary& sum = summaries_[s.submission_id][s.session_id];
  sum.slot = s.slot;
  sum.state = s.state;
  if (s.state == SessionState::kCompleted) sum.means = session_means(s);
}

std::map<std::string, double> HitlBroker::session_means(const HitlSession& s) const {
  std::map<std::string, double> means;
  for (const auto& [axis, rounds] : s.ratings) {
    if (rounds.empty()) continue;
    double sum = 0;
    for (const auto& [round, v] : rounds) sum += v;
    means[axis] = sum / static_cast<double>(rounds.size());
  }
  return means;
}

HitlSession HitlBroker::create_session(const std::string& submission_id,
                                       const HitlSubmission& info, std::int64_t slot_index,
                                       bool must_stage) {
  auto slot = std::make_unique<Slot>();
  try {
    slot->agent = std::make_unique<StagedAgent>(
        stage_agent(info.agent, blobs_, options_.work_root));
  } catch (const Error& e) {
    if (must_stage) {
      throw Error(ErrorCode::kStagingFailed, std::string("cannot stage agent: ") + e.what(),
                  {{"cause", code_name(e.code())}});
    }
  }
  HitlSession& s = slot->s;
  s.submission_id = submission_id;
  s.challenge_id = info.challenge_id;
  s.slot = slot_index;
  s.opened_at = s.last_activity = clock_.now();
  s.ttl_seconds = info.config.ttl_seconds;
  {
    std::lock_guard lock(mu_);
    auto& sessions = summaries_[submission_id];
    s.session_id = "hs-" + submission_id + "-" + std::to_string(sessions.size() + 1);
    sessions[s.session_id] = {slot_index, SessionState::kOpen, {}};
  }
  HitlSession copy = s;
  persist(copy);
  std::lock_guard lock(mu_);
  slots_.emplace(copy.session_id, std::move(slot));
  return copy;
}

std::vector<HitlSession> HitlBroker::open_sessions(const std::string& submission_id,
                                                   std::int64_t count) {
  if (count < 0) throw Error(ErrorCode::kBadRequest, "count must be non-negative");
  const HitlSubmission info = info_for(submission_id);
  std::int64_t first_slot = 0;
  {
    std::lock_guard lock(mu_);
    for (const auto& [id, sum] : summaries_[submission_id]) {
      first_slot = std::max(first_slot, sum.slot + 1);
    }
  }
  std::vector<HitlSession> out;
  for (std::int64_t i = 0; i < count; ++i) {
    out.push_back(create_session(submission_id, info, first_slot + i, true));
  }
  return out;
}

void HitlBroker::check_evaluator(const HitlConfig& config, const std::string& evaluator_id) const {
  if (config.blocklist.contains(evaluator_id)) {
    throw Error(ErrorCode::kBlocked, "evaluator is blocked for this challenge");
  }
  if (!config.whitelist.empty() && !config.whitelist.contains(evaluator_id)) {
    throw Error(ErrorCode::kBlocked, "evaluator is not on this challenge's whitelist");
  }
  std::lock_guard lock(mu_);
  auto it = evaluators_.find(evaluator_id);
  if (it == evaluators_.end() || !it->second.qualification_passed) {
    throw Error(ErrorCode::kNotQualified, "evaluator has not passed the qualification test");
  }
}

std::string HitlBroker::open_replacement(const HitlSession& expired) {
  const HitlSubmission info = info_for(expired.submission_id);
  return create_session(expired.submission_id, info, expired.slot, false).session_id;
}

void HitlBroker::expire_locked(Slot& slot) {
  HitlSession& s = slot.s;
  s.state = SessionState::kExpired;
  s.outcome = "rejected";
  slot.teardown();
  if (s.evaluator_id) {
    std::lock_guard lock(mu_);
    if (auto it = evaluators_.find(*s.evaluator_id); it != evaluators_.end()) {
      ++it->second.abandoned;
      save_evaluators_locked();
    }
  }
  persist(s);
  note_state(s);
  s.replaced_by = open_replacement(s);
  persist(s);
}

bool HitlBroker::expire_if_idle(Slot& slot) {
  const HitlSession& s = slot.s;
  if (!live(s.state)) return false;
  if (clock_.now() - s.last_activity <= std::chrono::seconds(s.ttl_seconds)) return false;
  expire_locked(slot);
  return true;
}

AgentInstance& HitlBroker::instance_for(Slot& slot) {
  if (!slot.agent) {
    const HitlSubmission info = info_for(slot.s.submission_id);
    try {
      slot.agent = std::make_unique<StagedAgent>(
          stage_agent(info.agent, blobs_, options_.work_root));
    } catch (const Error& e) {
      throw Error(ErrorCode::kStagingFailed, std::string("cannot stage agent: ") + e.what());
    }
  }
  if (!slot.instance) {
    slot.instance = std::make_unique<AgentInstance>(*slot.agent, options_.agent);
    // Bring a fresh process up to date with the rounds it missed.
    for (const auto& m : slot.s.transcript) {
      if (m.sender != "evaluator" || m.round > slot.s.round_count) continue;
      try {
        slot.instance->exchange({{"episode", slot.s.session_id},
                                 {"step", m.round},
                                 {"observation", {{"body", m.body}}},
                                 {"replay", true}});
      } catch (const Error&) {
        slot.instance.reset();
        throw;
      }
    }
  }
  return *slot.instance;
}

std::string HitlBroker::ask_agent(Slot& slot, std::int64_t round, const std::string& text) {
  AgentInstance& agent = instance_for(slot);
  json reply;
  try {
    reply = agent.exchange({{"episode", slot.s.session_id},
                            {"step", round},
                            {"observation", {{"body", text}}}});
  } catch (const Error&) {
    slot.instance.reset();
    throw;
  }
  auto answer = reply.find("answer");
  if (answer == reply.end() || answer->is_null()) {
    slot.instance->shutdown();
    slot.instance.reset();
    throw Error(ErrorCode::kProtocolViolation, "agent reply has no answer");
  }
  return answer->is_string() ? answer->get<std::string>() : answer->dump();
}

Pairing HitlBroker::pair(const std::string& session_id, const std::string& evaluator_id) {
  Slot& slot = get(session_id);
  std::unique_lock lock(slot.mu);
  HitlSession& s = slot.s;
  const HitlSubmission info = info_for(s.submission_id);
  check_evaluator(info.config, evaluator_id);
  if (expire_if_idle(slot)) {
    throw Error(ErrorCode::kSessionUnavailable, "session expired", {{"replaced_by", *s.replaced_by}});
  }
  switch (s.state) {
    case SessionState::kOpen:
      break;
    case SessionState::kPaired:
    case SessionState::kInterrupted:
      if (s.evaluator_id != evaluator_id) {
        throw Error(ErrorCode::kSessionUnavailable, "session belongs to another evaluator");
      }
      break;
    case SessionState::kCompleted:
    case SessionState::kExpired:
      throw Error(ErrorCode::kSessionUnavailable,
                  "session is " + std::string(to_string(s.state)));
  }
  // An agent that died while nobody was connected is replaced on reconnect.
  if (slot.instance && !slot.instance->alive()) slot.instance.reset();
  s.evaluator_id = evaluator_id;
  s.state = SessionState::kPaired;
  ++s.connection;
  s.last_activity = clock_.now();
  persist(s);
  note_state(s);

  Pairing p;
  p.instructions_html = info.config.instructions_html;
  p.frames.push_back({{"type", "instructions"},
                      {"session_id", s.session_id},
                      {"connection", s.connection},
                      {"html", info.config.instructions_html},
                      {"rounds_required", info.config.rounds_required},
                      {"rating_axes", info.config.rating_axes},
                      {"scale", {{"min", info.config.scale.min}, {"max", info.config.scale.max}}},
                      {"round_count", s.round_count}});
  if (!s.transcript.empty()) {
    p.frames.push_back({{"type", "replay"},
                        {"transcript", transcript_json(s.transcript)},
                        {"round_count", s.round_count},
                        {"ratings", ratings_json(s.ratings)}});
  }
  if (s.pending()) {
    const HitlMessage& waiting = s.transcript.back();
    try {
      std::string body = ask_agent(slot, waiting.round, waiting.body);
      s.transcript.push_back({"agent", waiting.round, std::move(body), clock_.now()});
      s.round_count = waiting.round;
      s.last_activity = clock_.now();
      persist(s);
      const auto& m = s.transcript.back();
      p.frames.push_back({{"type", "agent_msg"}, {"round", m.round}, {"body", m.body}});
    } catch (const Error& e) {
      s.state = SessionState::kInterrupted;
      persist(s);
      note_state(s);
      p.frames.push_back(error_frame(e));
    }
  }
  p.session = s;
  return p;
}

void HitlBroker::disconnect(const std::string& session_id, const std::string& evaluator_id,
                            std::optional<std::int64_t> connection) {
  Slot& slot = get(session_id);
  std::lock_guard lock(slot.mu);
  HitlSession& s = slot.s;
  if (s.state != SessionState::kPaired || s.evaluator_id != evaluator_id) return;
  if (connection && *connection != s.connection) return;
  s.state = SessionState::kInterrupted;
  persist(s);
  note_state(s);
}

HitlMessage HitlBroker::relay(const std::string& session_id, const std::string& evaluator_id,
                              const std::string& text) {
  Slot& slot = get(session_id);
  std::lock_guard lock(slot.mu);
  HitlSession& s = slot.s;
  if (expire_if_idle(slot)) throw Error(ErrorCode::kSessionNotPaired, "session expired");
  if (s.state != SessionState::kPaired || s.evaluator_id != evaluator_id) {
    throw Error(ErrorCode::kSessionNotPaired, "session is not paired with this evaluator");
  }
  const HitlSubmission info = info_for(s.submission_id);
  if (s.round_count >= info.config.rounds_required) {
    throw Error(ErrorCode::kRoundsExhausted,
                "all " + std::to_string(info.config.rounds_required) + " rounds are done");
  }
  if (s.pending()) {
    throw Error(ErrorCode::kSessionNotPaired, "previous message is still awaiting a reply");
  }
  const std::int64_t round = s.round_count + 1;
  s.transcript.push_back({"evaluator", round, text, clock_.now()});
  s.last_activity = clock_.now();
  persist(s);
  std::string body;
  try {
    body = ask_agent(slot, round, text);
  } catch (const Error&) {
    s.state = SessionState::kInterrupted;
    persist(s);
    note_state(s);
    throw;
  }
  s.transcript.push_back({"agent", round, std::move(body), clock_.now()});
  s.round_count = round;
  s.last_activity = clock_.now();
  persist(s);
  return s.transcript.back();
}

void HitlBroker::rate(const std::string& session_id, const std::string& evaluator_id,
                      const std::string& axis, std::int64_t round, int value) {
  Slot& slot = get(session_id);
  std::lock_guard lock(slot.mu);
  HitlSession& s = slot.s;
  if (expire_if_idle(slot)) throw Error(ErrorCode::kSessionNotPaired, "session expired");
  if (s.state != SessionState::kPaired || s.evaluator_id != evaluator_id) {
    throw Error(ErrorCode::kSessionNotPaired, "session is not paired with this evaluator");
  }
  const HitlSubmission info = info_for(s.submission_id);
  const auto& axes = info.config.rating_axes;
  if (std::find(axes.begin(), axes.end(), axis) == axes.end()) {
    throw Error(ErrorCode::kUnknownAxis, "unknown rating axis '" + axis + "'",
                {{"axes", axes}});
  }
  if (round < 1 || round > s.round_count) {
    throw Error(ErrorCode::kRoundNotReached,
                "round " + std::to_string(round) + " has not been exchanged",
                {{"round_count", s.round_count}});
  }
  if (value < info.config.scale.min || value > info.config.scale.max) {
    throw Error(ErrorCode::kOutOfScale,
                "rating must be within [" + std::to_string(info.config.scale.min) + ", " +
                    std::to_string(info.config.scale.max) + "]");
  }
  s.ratings[axis][round] = value;
  s.last_activity = clock_.now();
  persist(s);
}

std::string HitlBroker::finalize(const std::string& session_id, const std::string& evaluator_id) {
  Slot& slot = get(session_id);
  std::string submission;
  {
    std::lock_guard lock(slot.mu);
    HitlSession& s = slot.s;
    expire_if_idle(slot);
    if (s.state == SessionState::kExpired || s.state == SessionState::kCompleted) return s.outcome;
    if (s.evaluator_id != evaluator_id) {
      throw Error(ErrorCode::kSessionNotPaired, "session is not paired with this evaluator");
    }
    const HitlSubmission info = info_for(s.submission_id);
    if (s.state != SessionState::kPaired) {
      throw Error(ErrorCode::kSessionIncomplete, "session is " + std::string(to_string(s.state)));
    }
    if (s.round_count < info.config.rounds_required) {
      throw Error(ErrorCode::kSessionIncomplete,
                  "round " + std::to_string(s.round_count) + " of " +
                      std::to_string(info.config.rounds_required),
                  {{"round_count", s.round_count}});
    }
    json missing = json::array();
    for (const auto& axis : info.config.rating_axes) {
      for (std::int64_t r = 1; r <= info.config.rounds_required; ++r) {
        auto it = s.ratings.find(axis);
        if (it == s.ratings.end() || !it->second.contains(r)) {
          missing.push_back({{"axis", axis}, {"round", r}});
        }
      }
    }
    if (!missing.empty()) {
      throw Error(ErrorCode::kSessionIncomplete, "ratings are missing", {{"missing", missing}});
    }
    s.state = SessionState::kCompleted;
    s.outcome = "approved";
    s.last_activity = clock_.now();
    slot.teardown();
    persist(s);
    note_state(s);
    {
      std::lock_guard glock(mu_);
      if (auto it = evaluators_.find(evaluator_id); it != evaluators_.end()) {
        ++it->second.completed;
        save_evaluators_locked();
      }
    }
    submission = s.submission_id;
  }
  maybe_record(submission);
  return "approved";
}

void HitlBroker::maybe_record(const std::string& submission_id) {
  std::map<std::string, double> aggregate;
  {
    std::lock_guard lock(mu_);
    if (recorded_.contains(submission_id)) return;
    auto it = summaries_.find(submission_id);
    if (it == summaries_.end() || it->second.empty()) return;
    std::map<std::int64_t, const Summary*> done;
    std::set<std::int64_t> slots;
    for (const auto& [id, sum] : it->second) {
      slots.insert(sum.slot);
      if (sum.state == SessionState::kCompleted) done[sum.slot] = &sum;
    }
    if (done.size() != slots.size()) return;
    std::map<std::string, double> totals;
    for (const auto& [slot, sum] : done) {
      for (const auto& [axis, mean] : sum->means) totals[axis] += mean;
    }
    for (const auto& [axis, total] : totals) {
      aggregate[axis] = total / static_cast<double>(done.size());
    }
    recorded_.insert(submission_id);
  }
  try {
    host_.record_hitl_results(submission_id, aggregate);
  } catch (...) {
    std::lock_guard lock(mu_);
    recorded_.erase(submission_id);
    throw;
  }
}

std::vector<std::string> HitlBroker::sweep() {
  std::vector<Slot*> all;
  {
    std::lock_guard lock(mu_);
    for (auto& [id, slot] : slots_) all.push_back(slot.get());
  }
  std::vector<std::string> expired;
  for (Slot* slot : all) {
    std::lock_guard lock(slot->mu);
    if (expire_if_idle(*slot)) expired.push_back(slot->s.session_id);
  }
  return expired;
}

std::vector<json> HitlBroker::handle_frame(const std::string& session_id,
                                           const std::string& evaluator_id,
                                           std::int64_t connection, const json& frame) {
  try {
    {
      Slot& slot = get(session_id);
      std::lock_guard lock(slot.mu);
      if (slot.s.connection != connection || slot.s.evaluator_id != evaluator_id) {
        throw Error(ErrorCode::kSessionUnavailable, "this connection no longer holds the session");
      }
    }
    const std::string type = frame.value("type", "");
    if (type == "msg") {
      HitlMessage reply = relay(session_id, evaluator_id, frame.value("body", ""));
      return {{{"type", "agent_msg"}, {"round", reply.round}, {"body", reply.body}}};
    }
    if (type == "rate") {
      const std::string axis = frame.value("axis", "");
      const auto round = frame.value("round", std::int64_t{0});
      const int value = frame.value("value", 0);
      rate(session_id, evaluator_id, axis, round, value);
      return {{{"type", "ack"}, {"of", "rate"}, {"axis", axis}, {"round", round},
               {"value", value}}};
    }
    if (type == "finalize") {
      const std::string outcome = finalize(session_id, evaluator_id);
      return {{{"type", "ack"}, {"of", "finalize"}, {"outcome", outcome}}};
    }
    throw Error(ErrorCode::kBadRequest, "unknown frame type '" + type + "'");
  } catch (const Error& e) {
    return {error_frame(e)};
  } catch (const json::exception& e) {
    return {error_frame(Error(ErrorCode::kBadRequest, e.what()))};
  }
}

std::optional<HitlSession> HitlBroker::session(const std::string& session_id) const {
  Slot* slot = find(session_id);
  if (!slot) return std::nullopt;
  std::lock_guard lock(slot->mu);
  return slot->s;
}

std::vector<HitlSession> HitlBroker::sessions_of(const std::string& submission_id) const {
  std::vector<std::string> ids;
  {
    std::lock_guard lock(mu_);
    auto it = summaries_.find(submission_id);
    if (it != summaries_.end()) {
      for (const auto& [id, sum] : it->second) ids.push_back(id);
    }
  }
  std::vector<HitlSession> out;
  for (const auto& id : ids) {
    if (auto s = session(id)) out.push_back(std::move(*s));
  }
  std::sort(out.begin(), out.end(), [](const HitlSession& a, const HitlSession& b) {
    return a.opened_at != b.opened_at ? a.opened_at < b.opened_at : a.session_id < b.session_id;
  });
  return out;
}

std::vector<HitlSession> HitlBroker::available_for(const std::string& evaluator_id) const {
  std::vector<Slot*> all;
  std::map<std::string, HitlSubmission> infos;
  {
    std::lock_guard lock(mu_);
    for (auto& [id, slot] : slots_) all.push_back(slot.get());
    infos = submissions_;
  }
  std::vector<HitlSession> out;
  for (Slot* slot : all) {
    std::lock_guard lock(slot->mu);
    const HitlSession& s = slot->s;
    const bool mine = s.state == SessionState::kInterrupted && s.evaluator_id == evaluator_id;
    if (s.state != SessionState::kOpen && !mine) continue;
    if (clock_.now() - s.last_activity > std::chrono::seconds(s.ttl_seconds)) continue;
    auto it = infos.find(s.submission_id);
    if (it == infos.end()) continue;
    try {
      check_evaluator(it->second.config, evaluator_id);
    } catch (const Error&) {
      continue;
    }
    out.push_back(s);
  }
  return out;
}

json HitlBroker::report(const std::string& submission_id) const {
  json sessions = json::array();
  std::map<std::string, double> totals;
  std::int64_t completed = 0;
  for (const auto& s : sessions_of(submission_id)) {
    json j = to_json(s);
    const auto means = session_means(s);
    j["axis_means"] = means;
    if (s.state == SessionState::kCompleted) {
      ++completed;
      for (const auto& [axis, mean] : means) totals[axis] += mean;
    }
    sessions.push_back(std::move(j));
  }
  json aggregate = json::object();
  for (const auto& [axis, total] : totals) aggregate[axis] = total / static_cast<double>(completed);
  return {{"submission_id", submission_id},
          {"sessions", sessions},
          {"completed", completed},
          {"aggregate", aggregate}};
}

void HitlBroker::kill_agent_for_testing(const std::string& session_id) {
  Slot& slot = get(session_id);
  std::lock_guard lock(slot.mu);
  if (slot.instance) slot.instance->kill();
}

}  // namespace gauntlet
