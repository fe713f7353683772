#include "circuits/garble.hpp"
#include "proto/roles.hpp"

namespace oope::proto {

using net::MsgType;

DaClient::DaClient(DaConfig cfg, net::Channel& csp, DaLink& link, Rng rng, const hom::PrivateKey* da_sk)
    : cfg_(std::move(cfg)), csp_(csp), link_(link), rng_(std::move(rng)), da_sk_(da_sk) {
  cfg_.params.validate();
  if (!cfg_.clock) cfg_.clock = &steady_clock();
  if (cfg_.params.mode == ope::Mode::fh) {
    if (!da_sk_) fail(Errc::config, "FH mode needs a DA key pair");
    if (da_sk_->public_key().n() <= link_.do_pk.n()) fail(Errc::config, "DA modulus must exceed the DO modulus");
  }
  const uint32_t w = cfg_.params.width();
  circuit_ = cfg_.params.mode == ope::Mode::fh ? gc::build_fh_comparator(w) : gc::build_comparator(w);
}

SessionId DaClient::new_session() {
  SessionId sid{};
  rng_.fill(sid);
  return sid;
}

EncryptResult DaClient::encrypt(const std::string& column, uint64_t x) {
  const ProtocolParams& P = cfg_.params;
  if (P.l < 64 && x >> P.l) fail(Errc::domain, "value does not fit in " + std::to_string(P.l) + " bits");
  const bool fh = P.mode == ope::Mode::fh;
  const integ::Scheme scheme = P.integrity;
  const hom::PublicKey& do_pk = link_.do_pk;
  net::Channel& dch = *link_.ch;
  Stats* stats = cfg_.stats;
  const Clock& clock = *cfg_.clock;

  EncryptResult out;
  const SessionId sid = new_session();
  out.sid = sid;
  try {
    std::optional<mpz_class> da_n;
    if (fh) da_n = da_sk_->public_key().n();
    dch.send(MsgType::SESSION_JOIN, sid, encode(SessionJoin{column, da_n}));
    csp_.send(MsgType::SESSION_REQUEST, sid, encode(SessionRequest{Op::encrypt, column, da_n, {}}));
    const SessionStart start = decode_start(csp_.expect(MsgType::SESSION_START, sid).payload);
    if (start.column != column) fail(Errc::protocol, "CSP started a session for another column");
    out.h = start.h;

    const u128 offset_limit = u128(1) << P.offset_bits();
    const uint32_t w = P.width();
    bool share_e = true, share_r = false;
    for (uint32_t round = 0; round < start.h; ++round) {
      const Order r = decode_order(csp_.expect(MsgType::RANDOM_OFFSET, sid).payload);
      if (r.value() >= offset_limit) fail(Errc::protocol, "blinding offset too wide");
      const u128 vbar = u128(x) + r.value();

      if (scheme != integ::Scheme::off) {
        IntegrityTag tag = decode_tag(csp_.expect(MsgType::INTEGRITY_TAG, sid).payload, scheme);
        auto proof = dch.expect(MsgType::INTEGRITY_PROOF, sid);
        ScopedTimer t(clock, stats ? &stats->integrity_ns : nullptr);
        const mpz_class m = mpz_from_bytes(proof.payload);
        const mpz_class rv = to_mpz(r);
        bool ok = scheme == integ::Scheme::dlmac
                      ? integ::dl_mac_verify(*tag.tag.dl_mac, rv, m, link_.params)
                      : integ::ped_verify(*tag.tag.ped_commit, rv, tag.r2, m, link_.params);
        ++integrity_checks_;
        if (!ok) fail(Errc::integrity, "node failed the integrity check");
      }

      auto gcp = dch.expect(MsgType::GC_PAYLOAD, sid);
      ScopedTimer gc_timer(clock, stats ? &stats->gc_ns : nullptr);
      gc::GarbledPayload payload = gc::GarbledPayload::parse(gcp.payload, circuit_);
      Shares mine;
      gc::Bits choices;
      if (fh) {
        gc::FhEvalInput in{vbar, rng_.bit(), rng_.bit(), share_e, share_r};
        mine.mask_e = in.mask;
        choices = gc::fh_eval_bits(w, in);
      } else {
        mine.mask_e = rng_.bit();
        mine.mask_g = rng_.bit();
        choices = gc::comparator_eval_bits(w, vbar, mine.mask_e, mine.mask_g);
      }
      Bytes ot_request = link_.ot->request(choices);
      gc_timer.stop();
      dch.send(MsgType::OT_MSG, sid, ot_request);
      const net::Frame ot_answer = dch.expect(MsgType::OT_MSG, sid);
      gc_timer.restart();
      auto labels = link_.ot->finish(ot_answer.payload);
      gc::Evaluation ev(std::move(payload));
      const gc::Bits res = ev.run(circuit_, labels);
      gc_timer.stop();
      ++evaluations_;

      Bytes to_do;
      if (fh) {
        to_do = {res[0]};
        mine.share_e = res[0] ^ mine.mask_e;
        share_e = res[1];
        share_r = res[2];
      } else {
        to_do = {res[0], res[1]};
        mine.share_e = res[0] ^ mine.mask_e;
        mine.share_g = res[1] ^ mine.mask_g;
      }
      dch.send(MsgType::GC_RESULT, sid, to_do);
      const uint8_t sb = encode(mine);
      csp_.send(MsgType::SHARES, sid, std::span<const uint8_t>(&sb, 1));
      ++out.rounds;
    }

    out.y = decode_order(csp_.expect(MsgType::ORDER_RESULT, sid).payload);
    CipherUpload up;
    up.cipher = hom::encrypt(do_pk, mpz_class(static_cast<unsigned long>(x)), rng_, cfg_.pool);
    up.tag = integ::make_tag(scheme, mpz_class(static_cast<unsigned long>(x)), link_.params, do_pk, rng_, cfg_.pool);
    csp_.send(MsgType::CIPHER_UPLOAD, sid, encode(up, do_pk, scheme));

    if (fh) {
      const mpz_class& N = do_pk.n();
      const size_t nb = (mpz_sizeinbase(N.get_mpz_t(), 2) + 7) / 8;
      auto rf = csp_.expect(MsgType::MINMAX_RANDOMS, sid);
      if (rf.payload.size() != 2 * nb) fail(Errc::protocol, "malformed MINMAX_RANDOMS");
      Order bounds[2];
      for (int i = 0; i < 2; ++i) {
        const mpz_class ri = mpz_from_bytes(std::span<const uint8_t>(rf.payload).subspan(i * nb, nb));
        mpz_class inv;
        if (ri <= 0 || ri >= N || !mpz_invert(inv.get_mpz_t(), ri.get_mpz_t(), N.get_mpz_t())) {
          fail(Errc::protocol, "min-max blinding factor is not invertible");
        }
        const net::Frame sf = dch.expect(MsgType::MINMAX_SELECTED, sid);
        ByteReader br(sf.payload);
        const hom::Ciphertext sel = hom::read_ciphertext(br);
        br.expect_done("MINMAX_SELECTED");
        const mpz_class c = (da_sk_->decrypt(sel) * inv) % N;
        if (c <= 0 || c >= to_mpz(P.M)) fail(Errc::integrity, "min-max output outside the order range");
        bounds[i] = order_from_mpz(c);
      }
      if (!(bounds[0] <= out.y && out.y <= bounds[1])) fail(Errc::integrity, "min-max output does not bracket the order");
      out.c_min = bounds[0];
      out.c_max = bounds[1];
      BoundsUpload bu{hom::encrypt(do_pk, to_mpz(bounds[0]), rng_, cfg_.pool),
                    hom::encrypt(do_pk, to_mpz(bounds[1]), rng_, cfg_.pool)};
      csp_.send(MsgType::CIPHER_UPLOAD, sid, encode(bu, do_pk));
    }

    const SessionEnd end = decode_end(csp_.expect(MsgType::SESSION_END, sid).payload);
    if (end.rounds != out.h) fail(Errc::protocol, "CSP reports a different round count");
    if (!end.rebalanced && end.y != out.y) fail(Errc::protocol, "CSP changed the order after announcing it");
    out.y = end.y;
    out.existing = end.existing;
    out.rebalanced = end.rebalanced;
    csp_.forget(sid);
    dch.forget(sid);
  } catch (const Error& e) {
    const Errc reason = e.code() == Errc::aborted ? static_cast<const RemoteAbort*>(&e)->reason() : e.code();
    csp_.send_abort(sid, reason, e.what());
    dch.send_abort(sid, reason, e.what());
    csp_.forget(sid);
    dch.forget(sid);
    throw;
  }
  return out;
}

Bytes DaClient::query(std::span<const uint8_t> body) {
  const SessionId sid = new_session();
  SessionRequest req;
  req.op = Op::query;
  req.body.assign(body.begin(), body.end());
  try {
    csp_.send(MsgType::SESSION_REQUEST, sid, encode(req));
    Bytes out = csp_.expect(MsgType::QUERY_RESULT, sid).payload;
    csp_.forget(sid);
    return out;
  } catch (...) {
    csp_.forget(sid);
    throw;
  }
}

uint64_t DaClient::cleanup(const std::string& column, const std::vector<SessionId>& sids) {
  const SessionId sid = new_session();
  SessionRequest req;
  req.op = Op::cleanup;
  req.body = encode_cleanup(column, sids);
  try {
    csp_.send(MsgType::SESSION_REQUEST, sid, encode(req));
    auto f = csp_.expect(MsgType::CLEANUP, sid);
    ByteReader r(f.payload);
    uint64_t n = r.u64();
    r.expect_done("CLEANUP");
    csp_.forget(sid);
    return n;
  } catch (...) {
    csp_.forget(sid);
    throw;
  }
}

}  // namespace oope::proto
