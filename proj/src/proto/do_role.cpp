#include "circuits/garble.hpp"
#include "common/log.hpp"
#include "proto/roles.hpp"

namespace oope::proto {

using net::MsgType;

DoEngine::DoEngine(DoConfig cfg, const hom::PrivateKey& sk, Rng rng, const integ::MacParams* mac)
    : cfg_(std::move(cfg)), sk_(sk), rng_(std::move(rng)), mac_(mac), link_rng_(rng_.fork("do-links")) {
  cfg_.params.validate();
  if (!cfg_.clock) cfg_.clock = &steady_clock();
  if (cfg_.params.integrity != integ::Scheme::off && (!mac_ || !mac_->present())) {
    fail(Errc::config, "integrity enabled without MAC parameters");
  }
  const uint32_t w = cfg_.params.width();
  circuit_ = cfg_.params.mode == ope::Mode::fh ? gc::build_fh_comparator(w) : gc::build_comparator(w);
}

std::unique_ptr<DoLink> DoEngine::accept_link(std::unique_ptr<net::Channel> ch) {
  Rng rng = [&] {
    std::lock_guard lk(link_mu_);
    return link_rng_.fork("link");
  }();
  return accept_da_link(std::move(ch), cfg_.params, sk_.public_key(), mac_, rng);
}

void DoEngine::run_session(net::Channel& csp, DoLink& link, const SessionId& sid, const SessionStart& start,
                           const SessionJoin& join) {
  net::Channel& da = *link.ch;
  try {
    const ProtocolParams& P = cfg_.params;
    const bool fh = P.mode == ope::Mode::fh;
    const integ::Scheme scheme = P.integrity;
    const hom::PublicKey& pk = sk_.public_key();
    Stats* stats = cfg_.stats;
    const Clock& clock = *cfg_.clock;

    if (join.column != start.column) fail(Errc::protocol, "DA and CSP name different columns");
    std::optional<hom::PublicKey> da_pk;
    if (fh) {
      if (!join.da_n) fail(Errc::protocol, "FH session without the DA public key");
      da_pk.emplace(*join.da_n);
      if (da_pk->n() <= pk.n()) fail(Errc::config, "DA modulus must exceed the DO modulus");
    }

    const mpz_class limit = (mpz_class(1) << P.offset_bits()) + (mpz_class(1) << P.l);
    const uint32_t w = P.width();
    const size_t proof_width = mac_ ? (mpz_sizeinbase(mac_->p.get_mpz_t(), 2) + 7) / 8 : 0;
    bool share_e = false, share_r = false;  // carried FH state; the DA starts with e = 1

    for (uint32_t round = 0; round < start.h; ++round) {
      RandomizedNode rn = decode_node(csp.expect(MsgType::RANDOMIZED_NODE, sid).payload,
                                      scheme == integ::Scheme::pedersen);
      if (rn.node.key_id != pk.id()) fail(Errc::protocol, "blinded node is not under the DO key");
      mpz_class v;
      {
        ScopedTimer t(clock, stats ? &stats->decrypt_ns : nullptr);
        v = sk_.decrypt(rn.node);
      }
      if (v >= limit) fail(Errc::integrity, "blinded node decrypts out of range");

      if (scheme != integ::Scheme::off) {
        ScopedTimer t(clock, stats ? &stats->integrity_ns : nullptr);
        mpz_class m;
        if (scheme == integ::Scheme::dlmac) {
          m = integ::dl_response(v, *mac_);
        } else {
          m = integ::ped_response(v, sk_.decrypt(*rn.ped), *mac_);
        }
        da.send(MsgType::INTEGRITY_PROOF, sid, mpz_to_fixed(m, proof_width));
      }

      const Order vo = order_from_mpz(v);
      ScopedTimer gc_timer(clock, stats ? &stats->gc_ns : nullptr);
      gc::Garbling g = gc::garble(circuit_, rng_);
      gc::Bits gen;
      Shares mine;
      gc::FhGenInput fin;
      if (fh) {
        fin.value = vo.value();
        fin.mask = rng_.bit();
        fin.coin = rng_.bit();
        fin.share_e = share_e;
        fin.share_r = share_r;
        fin.next_mask_e = rng_.bit();
        fin.next_mask_r = rng_.bit();
        gen = gc::fh_gen_bits(w, fin);
        mine.mask_e = fin.mask;
      } else {
        mine.mask_e = rng_.bit();
        mine.mask_g = rng_.bit();
        gen = gc::comparator_gen_bits(w, vo.value(), mine.mask_e, mine.mask_g);
      }
      Bytes gc_payload = gc::make_payload(circuit_, g, gen).serialize();
      gc_timer.stop();
      da.send(MsgType::GC_PAYLOAD, sid, gc_payload);

      auto req = da.expect(MsgType::OT_MSG, sid);
      gc_timer.restart();
      std::vector<gc::LabelPair> pairs;
      pairs.reserve(circuit_.eval_inputs.size());
      for (uint32_t wire : circuit_.eval_inputs) pairs.push_back(g.pair(wire));
      Bytes ot_answer = link.ot->respond(req.payload, pairs);
      gc_timer.stop();
      da.send(MsgType::OT_MSG, sid, ot_answer);

      auto res = da.expect(MsgType::GC_RESULT, sid);
      const size_t expected = fh ? 1 : 2;
      if (res.payload.size() != expected) fail(Errc::protocol, "malformed GC_RESULT");
      for (uint8_t b : res.payload) {
        if (b > 1) fail(Errc::protocol, "malformed GC_RESULT");
      }
      mine.share_e = res.payload[0] ^ mine.mask_e;
      if (!fh) mine.share_g = res.payload[1] ^ mine.mask_g;
      if (fh) {
        share_e = fin.next_mask_e;
        share_r = fin.next_mask_r;
      }
      const uint8_t sb = encode(mine);
      csp.send(MsgType::SHARES, sid, std::span<const uint8_t>(&sb, 1));
    }

    if (fh) {
      MinMaxTriple t[2];
      for (auto& ti : t) ti = decode_triple(csp.expect(MsgType::MINMAX_TRIPLE, sid).payload);
      for (const auto& ti : t) {
        if (ti.d.key_id != pk.id() || ti.bound_do.key_id != pk.id() || ti.y_da.key_id != da_pk->id()) {
          fail(Errc::protocol, "min-max triple under the wrong keys");
        }
        hom::Ciphertext sel;
        if (sk_.decrypt(ti.d) == 0) {
          sel = hom::encrypt(*da_pk, sk_.decrypt(ti.bound_do), rng_);
        } else {
          sel = hom::rerandomize(*da_pk, ti.y_da, rng_);
        }
        ByteWriter bw;
        hom::write_ciphertext_fixed(bw, sel, da_pk->ciphertext_width());
        da.send(MsgType::MINMAX_SELECTED, sid, bw.buf());
      }
    }

    for (;;) {
      net::Frame f = csp.recv(sid);
      if (f.type == MsgType::TABLE_REMAP) {
        auto [column, remap] = decode_remap(f.payload);
        if (on_remap) on_remap(column, remap);
      } else if (f.type == MsgType::SESSION_END) {
        decode_end(f.payload);
        break;
      } else {
        fail(Errc::protocol, "expected SESSION_END, got " + std::string(net::msg_name(f.type)));
      }
    }
    csp.forget(sid);
    da.forget(sid);
  } catch (const Error& e) {
    const Errc reason = e.code() == Errc::aborted ? static_cast<const RemoteAbort*>(&e)->reason() : e.code();
    csp.send_abort(sid, reason, e.what());
    da.send_abort(sid, reason, e.what());
    csp.forget(sid);
    da.forget(sid);
    throw;
  }
}

struct DoServer::Slot {
  std::unique_ptr<DoLink> link;
  SessionId sid{};
  SessionJoin join;
  bool pending = false;
  bool closed = false;
};

DoServer::DoServer(DoEngine& engine, net::Channel& csp, std::chrono::milliseconds join_timeout)
    : engine_(engine), csp_(csp), join_timeout_(join_timeout) {}

DoServer::~DoServer() {
  stop();
  for (auto& s : slots_) s->link->ch->close();
  for (auto& t : readers_) {
    if (t.joinable()) t.join();
  }
}

void DoServer::attach(std::unique_ptr<DoLink> link) {
  auto slot = std::make_shared<Slot>();
  slot->link = std::move(link);
  std::lock_guard lk(mu_);
  slots_.push_back(slot);
  readers_.emplace_back([this, slot] { reader(slot); });
}

void DoServer::reader(std::shared_ptr<Slot> slot) {
  net::Channel& ch = *slot->link->ch;
  for (;;) {
    net::Frame f;
    try {
      f = ch.recv_any();
    } catch (const RemoteAbort&) {
      continue;
    } catch (const Error&) {
      std::lock_guard lk(mu_);
      slot->closed = true;
      return;
    }
    if (f.type != MsgType::SESSION_JOIN) continue;
    SessionJoin join;
    try {
      join = decode_join(f.payload);
    } catch (const Error& e) {
      ch.send_abort(f.session, e.code(), e.what());
      ch.forget(f.session);
      continue;
    }
    std::unique_lock lk(mu_);
    slot->sid = f.session;
    slot->join = std::move(join);
    slot->pending = true;
    joined_[f.session] = slot;
    cv_.notify_all();
    // The session itself reads this channel until it is released.
    cv_.wait(lk, [&] { return !slot->pending || stopping_; });
    if (stopping_) return;
  }
}

void DoServer::release(const SessionId& sid) {
  std::lock_guard lk(mu_);
  auto it = joined_.find(sid);
  if (it == joined_.end()) return;
  it->second->pending = false;
  joined_.erase(it);
  cv_.notify_all();
}

void DoServer::serve() {
  for (;;) {
    net::Frame f;
    try {
      f = csp_.recv_any(false);
    } catch (const Error& e) {
      if (e.code() == Errc::io || e.code() == Errc::framing) return;
      log_warn("DO: dropping malformed frame: " + std::string(e.what()));
      continue;
    }
    if (f.type == MsgType::ABORT) {
      // Refused before it started; let the DA link read again.
      release(f.session);
      csp_.forget(f.session);
      continue;
    }
    if (f.type != MsgType::SESSION_START) continue;
    const SessionId sid = f.session;
    std::shared_ptr<Slot> slot;
    {
      std::unique_lock lk(mu_);
      cv_.wait_for(lk, join_timeout_, [&] { return joined_.count(sid) > 0 || stopping_; });
      if (stopping_) return;
      auto it = joined_.find(sid);
      if (it != joined_.end()) slot = it->second;
    }
    if (!slot) {
      csp_.send_abort(sid, Errc::protocol, "no DA joined this session");
      csp_.forget(sid);
      continue;
    }
    try {
      engine_.run_session(csp_, *slot->link, sid, decode_start(f.payload), slot->join);
    } catch (const Error& e) {
      log_warn("DO: session aborted: " + std::string(e.what()));
    }
    release(sid);
    if (csp_.poisoned()) return;
  }
}

void DoServer::stop() {
  std::lock_guard lk(mu_);
  stopping_ = true;
  cv_.notify_all();
}

}  // namespace oope::proto
