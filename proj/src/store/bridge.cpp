#include "store/bridge.hpp"

#include <map>

namespace oope::store {

void attach(proto::CspEngine& csp, Store& store) {
  for (auto& [name, st] : store.db().tables) csp.add_column(name, &st);
  csp.on_query = [&store](std::span<const uint8_t> body) { return encode(store.query(decode_query(body))); };
  csp.on_remap = [&store](const std::string& column, const ope::Remap& remap) { store.apply_remap(column, remap); };
}

DaQueryOutcome da_range_query(proto::DaClient& da, const proto::ProtocolParams& params,
                              const std::vector<ValuePredicate>& where, bool count,
                              const std::vector<std::string>& select) {
  DaQueryOutcome out;
  std::map<std::string, std::vector<SessionId>> temp;
  auto cleanup = [&] {
    for (const auto& [column, sids] : temp) {
      out.removed += da.cleanup(column, sids);
      out.temporary.insert(out.temporary.end(), sids.begin(), sids.end());
    }
    temp.clear();
  };
  try {
    std::vector<BoundOrders> bounds;
    // A rebalance triggered by a later bound shifts the orders of earlier ones, so
    // the bounds are encrypted again; the second pass finds every bound present.
    for (int pass = 0; pass < 2; ++pass) {
      bounds.clear();
      bool stale = false;
      for (size_t i = 0; i < where.size(); ++i) {
        const proto::EncryptResult e = da.encrypt(where[i].column, where[i].value);
        if (!e.existing) temp[where[i].column].push_back(e.sid);
        if (e.rebalanced && i > 0) stale = true;
        bounds.push_back(params.mode == ope::Mode::fh ? BoundOrders{e.c_min.value(), e.c_max.value()} : BoundOrders{e.y, e.y});
      }
      if (!stale) break;
    }
    out.query.count = count;
    out.query.select = select;
    for (size_t i = 0; i < where.size(); ++i) out.query.where.push_back(to_range(where[i], bounds[i], params.M));
    out.result = decode_result(da.query(encode(out.query)));
  } catch (...) {
    try {
      cleanup();
    } catch (...) {
    }
    throw;
  }
  cleanup();
  return out;
}

}  // namespace oope::store
