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

#include "gauntlet/model.hpp"

namespace gauntlet {

const Phase* ChallengeConfig::find_phase_by_codename(const std::string& codename) const {
  for (const auto& p : phases) {
    if (p.codename == codename) return &p;
  }
  return nullptr;
}

const Phase* ChallengeConfig::find_phase(const std::string& phase_id) const {
  for (const auto& p : phases) {
    if (p.id == phase_id) return &p;
  }
  return nullptr;
}

const DatasetSplit* ChallengeConfig::find_split(const std::string& split_id) const {
  for (const auto& s : splits) {
    if (s.id == split_id) return &s;
  }
  return nullptr;
}

const DatasetSplit* ChallengeConfig::find_split_by_codename(
    const std::string& codename) const {
  for (const auto& s : splits) {
    if (s.codename == codename) return &s;
  }
  return nullptr;
}

std::vector<const PhaseSplit*> ChallengeConfig::splits_of_phase(
    const std::string& phase_id) const {
  std::vector<const PhaseSplit*> out;
  for (const auto& ps : phase_splits) {
    if (ps.phase_id == phase_id) out.push_back(&ps);
  }
  return out;
}

bool ChallengeConfig::higher_is_better(const std::string& metric) const {
  auto it = metrics.find(metric);
  return it == metrics.end() || it->second.higher_is_better;
}

std::string_view to_string(Visibility v) {
  switch (v) {
    case Visibility::kPublic:
      return "public";
    case Visibility::kHostOnly:
      return "host_only";
    case Visibility::kOwnerOnly:
      return "owner_only";
  }
  return "public";
}

std::optional<Visibility> parse_visibility(std::string_view s) {
  if (s == "public") return Visibility::kPublic;
  if (s == "host_only") return Visibility::kHostOnly;
  if (s == "owner_only") return Visibility::kOwnerOnly;
  return std::nullopt;
}

std::string_view to_string(EvaluatorKind k) {
  switch (k) {
    case EvaluatorKind::kPredictions:
      return "predictions";
    case EvaluatorKind::kAgent:
      return "agent";
    case EvaluatorKind::kHitl:
      return "hitl";
  }
  return "predictions";
}

std::optional<EvaluatorKind> parse_evaluator_kind(std::string_view s) {
  if (s == "predictions") return EvaluatorKind::kPredictions;
  if (s == "agent") return EvaluatorKind::kAgent;
  if (s == "hitl") return EvaluatorKind::kHitl;
  return std::nullopt;
}

}  // namespace gauntlet
