#include "proto/roles.hpp"

namespace oope::proto {

namespace {
const SessionId kLinkSession{};
}

std::unique_ptr<DoLink> accept_da_link(std::unique_ptr<net::Channel> ch, const ProtocolParams& params,
                                       const hom::PublicKey& do_pk, const integ::MacParams* mac, Rng& rng) {
  if (params.integrity != integ::Scheme::off && (!mac || !mac->present())) {
    fail(Errc::config, "integrity enabled without MAC parameters");
  }
  net::handshake(*ch, net::Role::do_, net::Role::da, params.digest());

  // The DA is the base-OT sender so that the DO ends up as extension sender.
  auto first = ch->expect(net::MsgType::OT_MSG, kLinkSession);
  std::vector<uint8_t> s(gc::kBaseOts);
  for (auto& bit : s) bit = rng.bit();
  gc::BaseOtReceiver base;
  ch->send(net::MsgType::OT_MSG, kLinkSession, base.respond(first.payload, s, rng));

  LinkInfo info;
  info.do_n = do_pk.n();
  info.scheme = params.integrity;
  if (info.scheme != integ::Scheme::off) info.params = *mac;
  ch->send(net::MsgType::LINK_INFO, kLinkSession, encode(info));

  auto link = std::make_unique<DoLink>();
  link->ot = std::make_unique<gc::OtExtSender>(s, base.keys());
  link->ch = std::move(ch);
  return link;
}

std::unique_ptr<DaLink> open_do_link(std::unique_ptr<net::Channel> ch, const ProtocolParams& params, Rng& rng) {
  net::handshake(*ch, net::Role::da, net::Role::do_, params.digest());

  gc::BaseOtSender base;
  ch->send(net::MsgType::OT_MSG, kLinkSession, base.first_message(rng));
  auto reply = ch->expect(net::MsgType::OT_MSG, kLinkSession);
  auto keys = base.finish(reply.payload, gc::kBaseOts);

  LinkInfo info = decode_link_info(ch->expect(net::MsgType::LINK_INFO, kLinkSession).payload);
  if (info.scheme != params.integrity) fail(Errc::handshake, "DO announced a different integrity scheme");
  if (info.scheme != integ::Scheme::off && !integ::validate_params(info.params)) {
    fail(Errc::integrity, "DO sent invalid MAC parameters");
  }

  auto link = std::make_unique<DaLink>();
  link->ot = std::make_unique<gc::OtExtReceiver>(keys);
  link->do_pk = hom::PublicKey(info.do_n);
  link->scheme = info.scheme;
  link->params = info.params;
  link->ch = std::move(ch);
  return link;
}

Bytes encode_cleanup(const std::string& column, const std::vector<SessionId>& sids) {
  ByteWriter w;
  w.str(column);
  w.u32(static_cast<uint32_t>(sids.size()));
  for (const auto& s : sids) w.raw(s);
  return w.take();
}

}  // namespace oope::proto
