#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "proto/roles.hpp"
#include "store/store.hpp"

namespace oope::store {

// Registers every OPE column of the store with the CSP engine and routes queries and
// rebalance remaps to the store. The store must outlive the engine's sessions.
void attach(proto::CspEngine& csp, Store& store);

struct DaQueryOutcome {
  RangeQuery query;  // what was sent to the CSP
  QueryResult result;
  std::vector<SessionId> temporary;  // sessions whose entries were removed again
  uint64_t removed = 0;
};

// Encrypts every predicate bound, rewrites the predicates into order intervals, runs
// the query and removes the bound entries that were not already in the table. The
// cleanup also runs when the query fails.
DaQueryOutcome da_range_query(proto::DaClient& da, const proto::ProtocolParams& params,
                              const std::vector<ValuePredicate>& where, bool count,
                              const std::vector<std::string>& select = {});

}  // namespace oope::store
