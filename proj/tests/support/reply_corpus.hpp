#pragma once

#include <string>
#include <vector>

#include "drivesim/idm_planner.hpp"

namespace testsupport
{

struct CorpusCase
{
  std::string name;
  std::string text;
  drivesim::PlannerParams expected;
};

/// 100 parameter replies in the shapes chat models actually produce: ten
/// wrappings (fences, prose, nesting) crossed with ten syntax quirks.
std::vector<CorpusCase> reply_corpus();

}  // namespace testsupport
