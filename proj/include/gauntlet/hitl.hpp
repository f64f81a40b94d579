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

// Human-in-the-loop session broker.
//
// A HITL submission is an agent that human evaluators talk to. For each
// evaluation slot the broker opens a session backed by its own staged agent
// instance; an evaluator pairs with it, exchanges rounds_required rounds of
// messages and rates every agent reply on every axis, then finalizes.
//
// Session state is written to disk before any reply leaves the broker, so a
// broker restart or an agent crash loses nothing: the evaluator reconnects,
// gets the transcript replayed and, if a message was in flight, its reply.
// Sessions idle past their ttl expire and are replaced, one for one.
//
// Agents see one frame per evaluator message:
//   {"episode": <session id>, "step": <round>, "observation": {"body": "..."}}
// (with "replay": true while a restarted instance is brought up to date) and
// answer {"action": "respond", "answer": "<text>"}.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gauntlet/agent.hpp"
#include "gauntlet/blob_store.hpp"
#include "gauntlet/clock.hpp"
#include "gauntlet/model.hpp"

namespace gauntlet {

enum class SessionState { kOpen, kPaired, kInterrupted, kCompleted, kExpired };

std::string_view to_string(SessionState s);
std::optional<SessionState> parse_session_state(std::string_view s);

struct HitlMessage {
  std::string sender;  // "evaluator" or "agent"
  std::int64_t round = 0;
  std::string body;
  Timestamp sent_at{};

  friend bool operator==(const HitlMessage&, const HitlMessage&) = default;
};

struct HitlSession {
  std::string session_id;
  std::string submission_id;
  std::string challenge_id;
  std::int64_t slot = 0;  // evaluation slot this session fills
  std::optional<std::string> evaluator_id;
  SessionState state = SessionState::kOpen;
  std::int64_t round_count = 0;  // completed rounds
  std::vector<HitlMessage> transcript;
  std::map<std::string, std::map<std::int64_t, int>> ratings;  // axis -> round -> value
  Timestamp opened_at{};
  Timestamp last_activity{};
  std::int64_t ttl_seconds = 1800;
  std::int64_t connection = 0;  // bumps on every pairing; stale channels are refused
  std::string outcome;          // "", "approved", "rejected"
  std::optional<std::string> replaced_by;

  // An evaluator message whose agent reply has not been recorded yet.
  bool pending() const {
    return !transcript.empty() && transcript.back().sender == "evaluator";
  }
};

nlohmann::json to_json(const HitlSession& s);
HitlSession hitl_session_from_json(const nlohmann::json& j);

struct EvaluatorProfile {
  std::string evaluator_id;
  bool qualification_passed = false;
  std::int64_t completed = 0;
  std::int64_t abandoned = 0;
};

nlohmann::json to_json(const EvaluatorProfile& p);

// What the broker needs from the submission store.
struct HitlSubmission {
  std::string challenge_id;
  HitlConfig config;
  AgentBundle agent;
};

class HitlHost {
 public:
  virtual ~HitlHost() = default;
  // Throws Error{kUnknownSubmission} or Error{kNotHitlChallenge}.
  virtual HitlSubmission hitl_submission(const std::string& submission_id) = 0;
  // Called once every slot of the submission has a Completed session, with
  // the mean over those sessions of each session's per-axis mean rating.
  virtual void record_hitl_results(const std::string& submission_id,
                                   const std::map<std::string, double>& axis_means) = 0;
};

struct HitlOptions {
  std::filesystem::path state_dir;  // sessions/*.json, evaluators.json
  std::filesystem::path work_root;  // staged agents
  AgentOptions agent;
};

struct Pairing {
  HitlSession session;
  std::string instructions_html;
  // Frames for the evaluator: instructions, a replay when there is history,
  // and the agent reply to a message that was in flight when the session was
  // interrupted.
  std::vector<nlohmann::json> frames;
};

class HitlBroker {
 public:
  HitlBroker(const Clock& clock, BlobStore& blobs, HitlHost& host, HitlOptions options);
  ~HitlBroker();

  // Loads persisted sessions. Sessions that were Paired become Interrupted:
  // their evaluator has to reconnect.
  void recover();

  void register_evaluator(const EvaluatorProfile& profile);
  std::optional<EvaluatorProfile> evaluator(const std::string& evaluator_id) const;

  // Throws Error{kNotHitlChallenge}, Error{kStagingFailed}.
  std::vector<HitlSession> open_sessions(const std::string& submission_id, std::int64_t count);

  // Throws Error{kSessionUnavailable}, Error{kNotQualified}, Error{kBlocked},
  // Error{kNotFound}.
  Pairing pair(const std::string& session_id, const std::string& evaluator_id);
  // Paired -> Interrupted. Ignored when the connection is stale.
  void disconnect(const std::string& session_id, const std::string& evaluator_id,
                  std::optional<std::int64_t> connection = std::nullopt);

  // Returns the agent reply. Throws Error{kSessionNotPaired},
  // Error{kRoundsExhausted}, Error{kAgentTimeout}/kAgentCrashed (the session
  // is then Interrupted).
  HitlMessage relay(const std::string& session_id, const std::string& evaluator_id,
                    const std::string& text);
  // Throws Error{kUnknownAxis}, Error{kRoundNotReached}, Error{kOutOfScale},
  // Error{kSessionNotPaired}.
  void rate(const std::string& session_id, const std::string& evaluator_id,
            const std::string& axis, std::int64_t round, int value);
  // "approved" or "rejected". Throws Error{kSessionIncomplete}.
  std::string finalize(const std::string& session_id, const std::string& evaluator_id);

  // Expires sessions idle past their ttl and opens one replacement for each.
  // Returns the ids of the expired sessions.
  std::vector<std::string> sweep();

  // One channel frame from the evaluator client; returns the broker's
  // frames. Errors come back as {"type": "error", ...} frames.
  std::vector<nlohmann::json> handle_frame(const std::string& session_id,
                                           const std::string& evaluator_id,
                                           std::int64_t connection, const nlohmann::json& frame);

  std::optional<HitlSession> session(const std::string& session_id) const;
  std::vector<HitlSession> sessions_of(const std::string& submission_id) const;
  // Sessions an evaluator could pair with right now.
  std::vector<HitlSession> available_for(const std::string& evaluator_id) const;
  nlohmann::json report(const std::string& submission_id) const;

  // Fault injection: kills a session's agent process.
  void kill_agent_for_testing(const std::string& session_id);

 private:
  struct Slot;

  Slot* find(const std::string& session_id) const;
  Slot& get(const std::string& session_id) const;
  void persist(const HitlSession& s) const;
  void save_evaluators_locked() const;
  HitlSession create_session(const std::string& submission_id, const HitlSubmission& info,
                             std::int64_t slot, bool must_stage);
  HitlSubmission info_for(const std::string& submission_id);
  AgentInstance& instance_for(Slot& slot);
  std::string ask_agent(Slot& slot, std::int64_t round, const std::string& text);
  bool expire_if_idle(Slot& slot);
  void expire_locked(Slot& slot);
  std::map<std::string, double> session_means(const HitlSession& s) const;
  std::string open_replacement(const HitlSession& expired);
  void check_evaluator(const HitlConfig& config, const std::string& evaluator_id) const;
  void maybe_record(const std::string& submission_id);
  void note_state(const HitlSession& s);

  const Clock& clock_;
  BlobStore& blobs_;
  HitlHost& host_;
  HitlOptions options_;

  mutable std::mutex mu_;  // guards everything below; taken after a slot lock
  std::map<std::string, std::unique_ptr<Slot>> slots_;
  std::map<std::string, HitlSubmission> submissions_;
  std::map<std::string, EvaluatorProfile> evaluators_;
  struct Summary {
    std::int64_t slot = 0;
    SessionState state = SessionState::kOpen;
    std::map<std::string, double> means;  // per-axis means once Completed
  };
  std::map<std::string, std::map<std::string, Summary>> summaries_;  // submission -> session
  std::set<std::string> recorded_;
};

}  // namespace gauntlet
