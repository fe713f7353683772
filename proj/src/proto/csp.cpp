#include "common/log.hpp"
#include "proto/roles.hpp"

namespace oope::proto {

using net::MsgType;

CspEngine::CspEngine(CspConfig cfg, hom::PublicKey do_pk, Rng rng, hom::RandomnessPool* pool)
    : cfg_(std::move(cfg)), do_pk_(std::move(do_pk)), rng_(std::move(rng)), pool_(pool) {
  cfg_.params.validate();
  if (!cfg_.clock) cfg_.clock = &steady_clock();
}

void CspEngine::add_column(const std::string& name, ope::ServerState* state) {
  if (state->table.mode() != cfg_.params.mode) fail(Errc::config, "column " + name + " has the wrong OPE mode");
  if (state->table.M() != cfg_.params.M || state->table.l() != cfg_.params.l) {
    fail(Errc::config, "column " + name + " was built with other parameters");
  }
  columns_[name] = state;
}

ope::ServerState& CspEngine::column(const std::string& name) {
  auto it = columns_.find(name);
  if (it == columns_.end()) fail(Errc::usage, "unknown column " + name);
  return *it->second;
}

std::optional<CspSessionRecord> CspEngine::last_session() const {
  std::lock_guard lk(record_mu_);
  return last_;
}

void CspEngine::serve_da(net::Channel& da, net::Channel& do_ch) {
  uint64_t served = 0;
  for (;;) {
    net::Frame f;
    try {
      f = da.recv_any();
    } catch (const RemoteAbort&) {
      continue;  // abort for a session that already ended here
    } catch (const Error& e) {
      if (e.code() == Errc::io) return;  // DA hung up
      throw;
    }
    if (f.type != MsgType::SESSION_REQUEST) continue;  // stale frame of a dead session
    ++served;
    if (admit && !admit(da.name(), served)) {
      da.send_abort(f.session, Errc::retryable, "session refused by admission policy");
      do_ch.send_abort(f.session, Errc::retryable, "session refused by admission policy");
      da.forget(f.session);
      continue;
    }
    try {
      handle(da, do_ch, f);
    } catch (const Error& e) {
      log_warn("session aborted: " + std::string(e.what()));
      if (da.poisoned()) return;
      if (do_ch.poisoned()) throw;
    }
  }
}

void CspEngine::handle(net::Channel& da, net::Channel& do_ch, const net::Frame& request) {
  const SessionId sid = request.session;
  std::lock_guard lk(session_mu_);
  try {
    if (request.type != MsgType::SESSION_REQUEST) {
      fail(Errc::protocol, "expected SESSION_REQUEST, got " + std::string(net::msg_name(request.type)));
    }
    SessionRequest req = decode_request(request.payload);
    switch (req.op) {
      case Op::encrypt:
        run_encrypt(da, do_ch, sid, req);
        break;
      case Op::query: {
        if (!on_query) fail(Errc::usage, "this server does not answer queries");
        Bytes out = on_query(req.body);
        da.send(MsgType::QUERY_RESULT, sid, out);
        break;
      }
      case Op::cleanup:
        run_cleanup(da, sid, req);
        break;
    }
    da.forget(sid);
    do_ch.forget(sid);
  } catch (const Error& e) {
    const Errc reason = e.code() == Errc::aborted ? static_cast<const RemoteAbort*>(&e)->reason() : e.code();
    da.send_abort(sid, reason, e.what());
    do_ch.send_abort(sid, reason, e.what());
    da.forget(sid);
    do_ch.forget(sid);
    throw;
  }
}

void CspEngine::run_cleanup(net::Channel& da, const SessionId& sid, const SessionRequest& req) {
  ByteReader r(req.body);
  std::string col = r.str();
  uint32_t n = r.u32();
  if (n > r.remaining() / 16) fail(Errc::protocol, "cleanup list exceeds payload");
  std::set<SessionId> sids;
  for (uint32_t i = 0; i < n; ++i) sids.insert(r.array<16>());
  r.expect_done("cleanup request");

  std::vector<std::string> targets;
  if (col.empty()) {
    for (const auto& [name, _] : columns_) targets.push_back(name);
  } else {
    column(col);
    targets.push_back(col);
  }
  uint64_t removed = 0;
  std::set<SessionId> seen;
  for (const auto& name : targets) {
    ope::ServerState& st = column(name);
    const size_t n_removed = ope::remove_da_entries(st, sids, &seen);
    removed += n_removed;
    if (n_removed && on_commit) on_commit(name);
  }
  for (const auto& s : sids) {
    if (!seen.count(s)) log_warn("cleanup: no entries for session " + to_hex(s));
  }
  ByteWriter w;
  w.u64(removed);
  da.send(MsgType::CLEANUP, sid, w.buf());
}

namespace {

mpz_class random_unit_below(const mpz_class& n, Rng& rng) {
  for (;;) {
    mpz_class r = rng.below(n);
    if (r == 0) continue;
    mpz_class g;
    mpz_gcd(g.get_mpz_t(), r.get_mpz_t(), n.get_mpz_t());
    if (g == 1) return r;
  }
}

}  // namespace

void CspEngine::run_encrypt(net::Channel& da, net::Channel& do_ch, const SessionId& sid, const SessionRequest& req) {
  const ProtocolParams& P = cfg_.params;
  const bool fh = P.mode == ope::Mode::fh;
  const integ::Scheme scheme = P.integrity;
  Stats* stats = cfg_.stats;
  ScopedTimer session_timer(*cfg_.clock, stats ? &stats->session_ns : nullptr);

  ope::ServerState& st = column(req.column);
  std::optional<hom::PublicKey> da_pk;
  if (fh) {
    if (!req.da_n) fail(Errc::protocol, "FH session without the DA public key");
    da_pk.emplace(*req.da_n);
    if (da_pk->n() <= do_pk_.n()) fail(Errc::config, "DA modulus must exceed the DO modulus");
  }

  const uint32_t h = st.tree.height();
  const Bytes start = encode(SessionStart{req.column, h});
  do_ch.send(MsgType::SESSION_START, sid, start);
  da.send(MsgType::SESSION_START, sid, start);

  int32_t cur = st.tree.root();
  bool equal = false;  // deterministic mode: equality found, dummy rounds follow
  bool done = false;   // reached a missing child, dummy rounds follow
  ope::Side side = ope::Side::left;
  for (uint32_t round = 0; round < h; ++round) {
    ScopedTimer round_timer(*cfg_.clock, stats ? &stats->round_ns : nullptr);
    const ope::OpeEntry& e = st.table.at(st.tree.node(cur).order);
    RoundView view{round, e.order, e.cipher, e.tag};
    if (cfg_.tamper) cfg_.tamper(view);

    const mpz_class r = rng_.bits(P.offset_bits());
    RandomizedNode rn;
    rn.node = hom::hom_add(do_pk_, view.cipher, hom::encrypt(do_pk_, r, rng_, pool_));
    mpz_class r2;
    if (scheme == integ::Scheme::pedersen) {
      if (!view.tag.ped_a) fail(Errc::integrity, "node carries no commitment randomness");
      r2 = rng_.bits(kPedersenOffsetBits);
      rn.ped = hom::hom_add(do_pk_, *view.tag.ped_a, hom::encrypt(do_pk_, r2, rng_, pool_));
    }
    do_ch.send(MsgType::RANDOMIZED_NODE, sid, encode(rn, do_pk_));
    da.send(MsgType::RANDOM_OFFSET, sid, encode_order(order_from_mpz(r)));
    if (scheme != integ::Scheme::off) da.send(MsgType::INTEGRITY_TAG, sid, encode(IntegrityTag{view.tag, r2}));

    const Shares sa = decode_shares(da.expect(MsgType::SHARES, sid).payload);
    const Shares so = decode_shares(do_ch.expect(MsgType::SHARES, sid).payload);
    const bool b_e = sa.share_e ^ so.mask_e;
    if (b_e != (so.share_e ^ sa.mask_e)) fail(Errc::integrity, "comparison shares disagree");
    bool b_g = false;
    if (!fh) {
      b_g = sa.share_g ^ so.mask_g;
      if (b_g != (so.share_g ^ sa.mask_g)) fail(Errc::integrity, "comparison shares disagree");
    }
    if (stats) ++stats->rounds;

    if (equal || done) continue;
    // FH: b_e carries the traversal bit; deterministic: b_e = [xbar != x], b_g = [xbar > x].
    bool dir;
    if (fh) {
      dir = b_e;
    } else {
      if (!b_e) {
        equal = true;
        continue;
      }
      dir = b_g;
    }
    side = dir ? ope::Side::right : ope::Side::left;
    int32_t next = st.tree.child(cur, side);
    if (next == ope::OpeTree::kNil) {
      done = true;
    } else {
      cur = next;
    }
  }
  if (h > 0 && !equal && !done) fail(Errc::internal, "traversal did not reach a leaf within the tree height");

  ope::InsertPlan plan;
  bool existing = false;
  if (equal) {
    existing = true;
    plan.y = st.tree.node(cur).order;
  } else {
    std::optional<Order> at;
    if (h > 0) at = st.tree.node(cur).order;
    plan = ope::plan_insert(st, at, side, !fh && cfg_.allow_rebalance);
  }
  const Order y = plan.y;
  da.send(MsgType::ORDER_RESULT, sid, encode_order(y));

  CipherUpload up = decode_upload(da.expect(MsgType::CIPHER_UPLOAD, sid).payload, scheme);
  if (up.cipher.key_id != do_pk_.id()) fail(Errc::protocol, "upload is not under the DO key");
  if (up.tag.ped_a && up.tag.ped_a->key_id != do_pk_.id()) fail(Errc::protocol, "upload is not under the DO key");

  std::optional<BoundsUpload> bounds;
  if (fh) {
    const mpz_class& N = do_pk_.n();
    const ope::OpeEntry* lo = st.table.predecessor(y, true);
    const ope::OpeEntry* hi = st.table.successor(y, true);
    mpz_class rs[2];
    for (int side_i = 0; side_i < 2; ++side_i) {
      const ope::OpeEntry* nb = side_i == 0 ? lo : hi;
      const mpz_class s = random_unit_below(N, rng_);
      const mpz_class rr = random_unit_below(N, rng_);
      rs[side_i] = rr;
      MinMaxTriple t;
      if (nb) {
        const auto& bound = side_i == 0 ? nb->fh_min : nb->fh_max;
        if (!bound) fail(Errc::internal, "DO entry lacks its min/max ciphertexts");
        const hom::Ciphertext diff = side_i == 0 ? hom::hom_sub(do_pk_, up.cipher, nb->cipher)
                                                 : hom::hom_sub(do_pk_, nb->cipher, up.cipher);
        t.d = hom::rerandomize(do_pk_, hom::hom_scale(do_pk_, diff, s), rng_, pool_);
        t.bound_do = hom::rerandomize(do_pk_, hom::hom_scale(do_pk_, *bound, rr), rng_, pool_);
      } else {
        // Virtual bound: a nonzero difference so the DO always picks the new order.
        t.d = hom::encrypt(do_pk_, s, rng_, pool_);
        t.bound_do = hom::encrypt(do_pk_, rng_.below(N), rng_, pool_);
      }
      t.y_da = hom::encrypt(*da_pk, (to_mpz(y) * rr) % N, rng_);
      do_ch.send(MsgType::MINMAX_TRIPLE, sid, encode(t, do_pk_, *da_pk));
    }
    ByteWriter w;
    const size_t nb = (mpz_sizeinbase(N.get_mpz_t(), 2) + 7) / 8;
    w.raw(mpz_to_fixed(rs[0], nb));
    w.raw(mpz_to_fixed(rs[1], nb));
    da.send(MsgType::MINMAX_RANDOMS, sid, w.buf());

    bounds = decode_bounds(da.expect(MsgType::CIPHER_UPLOAD, sid).payload);
    if (bounds->fh_min.key_id != do_pk_.id() || bounds->fh_max.key_id != do_pk_.id()) {
      fail(Errc::protocol, "bounds are not under the DO key");
    }
  }

  // Commit point: nothing above touched the column.
  const bool rebalanced = plan.remap.has_value();
  if (!existing) {
    ope::OpeEntry entry;
    entry.cipher = std::move(up.cipher);
    entry.tag = std::move(up.tag);
    entry.da_session = sid;
    if (bounds) {
      entry.fh_min = std::move(bounds->fh_min);
      entry.fh_max = std::move(bounds->fh_max);
    }
    ope::commit_insert(st, plan, std::move(entry));
    if (rebalanced && on_remap) on_remap(req.column, *plan.remap);
  }
  if (stats) ++stats->sessions;
  {
    std::lock_guard lk(record_mu_);
    last_ = CspSessionRecord{sid, req.column, h, h, y, existing, rebalanced};
  }
  if (!existing && on_commit) on_commit(req.column);

  if (rebalanced) do_ch.send(MsgType::TABLE_REMAP, sid, encode_remap(req.column, *plan.remap));
  const Bytes end = encode(SessionEnd{y, existing, rebalanced, h});
  do_ch.send(MsgType::SESSION_END, sid, end);
  da.send(MsgType::SESSION_END, sid, end);
}

}  // namespace oope::proto
