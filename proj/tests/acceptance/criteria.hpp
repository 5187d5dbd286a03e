#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tlab/clustering.hpp"
#include "tlab/kg.hpp"

namespace tlab::acceptance {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
  double time_limit = 0.0;
};

struct Criterion {
  int id;
  std::string name;
  double time_limit;  // seconds
  std::function<CriterionResult()> run;
};

const std::vector<Criterion>& criteria();

// Ring of k hubs used for the generalization sweep. Cluster i holds
// c_{i-1,j} -r_in-> b_i and b_i -r_out_j-> c_{i,j} for j < n, so
// |D| = k n^2 and |T1| = 2 k n; across-expertise paths run
// b_i -> c_{i,j} -> b_{i+1}.
struct Gadget {
  KnowledgeGraph graph;
  EdgePartition partition;
};
Gadget hub_gadget(std::size_t k, std::size_t n);

// Runs one criterion, timing it; exceptions count as failures and the time
// limit is part of the verdict.
CriterionResult run_criterion(const Criterion& c);

std::string format_result(const CriterionResult& r);

}  // namespace tlab::acceptance
