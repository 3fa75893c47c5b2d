#include <mutex>
#include <thread>

#include "chargescope/orchestrator.hpp"
#include "chargescope/slac/constants.hpp"

namespace chargescope::orchestrator {

struct DeskTarget::Impl {
  std::mutex mu;
  std::vector<SimulatorRun> runs;
};

DeskTarget::DeskTarget(evse::EvseProfile profile, evse::EvseOptions options)
    : profile_(std::move(profile)), options_(options), impl_(std::make_unique<Impl>()) {
  evse::validate_profile(profile_);
}

DeskTarget::~DeskTarget() = default;

StationInfo DeskTarget::station() const {
  return {profile_.name, {profile_.cpo, profile_.manufacturer}, profile_.model,
          profile_.install_year, profile_.year_label};
}

std::vector<SimulatorRun> DeskTarget::runs() const {
  std::lock_guard lock(impl_->mu);
  return impl_->runs;
}

namespace {

// Station-side state of one desk session, shared with the simulator thread.
struct DeskSession {
  std::unique_ptr<MessageChannel> slac;
  std::unique_ptr<MessageChannel> sdp;
  std::unique_ptr<ByteStream> stream;
  std::unique_ptr<ByteStream> ev_stream;
  std::shared_ptr<slac::ControlPilot> pilot;
  std::shared_ptr<CaptureLog> log = std::make_shared<CaptureLog>();
  evse::EvseSessionLog result;
  std::optional<std::string> error;
  std::mutex mu;
};

}  // namespace

TargetSession DeskTarget::open(int scenario_id, CaptureLog& log) {
  auto s = std::make_shared<DeskSession>();
  auto [ev_slac, evse_slac] = make_in_process_channel_pair();
  auto [ev_sdp, evse_sdp] = make_in_process_channel_pair();
  auto [ev_stream, evse_stream] = make_in_process_stream_pair();
  s->slac = std::move(evse_slac);
  s->sdp = std::move(evse_sdp);
  s->stream = std::move(evse_stream);
  s->ev_stream = std::move(ev_stream);
  s->pilot = std::make_shared<slac::ControlPilot>(&log);
  // Plug-in: the station signals state B with a 5 % duty cycle (HLC).
  s->pilot->apply({slac::CpState::B, 5.0});

  std::thread worker([s, profile = profile_, options = options_] {
    evse::EvseLinks links;
    links.slac = s->slac.get();
    links.sdp = s->sdp.get();
    links.advertised = parse_endpoint("fe80::2", 50021);
    links.accept = [s](Clock::time_point) {
      std::lock_guard lock(s->mu);
      return std::move(s->stream);
    };
    try {
      s->result = evse::run_evse(profile, links, *s->log, options);
    } catch (const std::exception& e) {
      s->error = e.what();
    }
  });

  TargetSession session;
  session.slac = std::move(ev_slac);
  session.sdp = std::move(ev_sdp);
  session.control_pilot = s->pilot.get();
  session.connect = [s](const Endpoint&, Clock::time_point) -> std::unique_ptr<ByteStream> {
    std::lock_guard lock(s->mu);
    if (!s->ev_stream) throw TransportError("connection already used");
    return std::move(s->ev_stream);
  };
  auto worker_ptr = std::make_shared<std::thread>(std::move(worker));
  session.finish = [this, s, worker_ptr, scenario_id] {
    {
      std::lock_guard lock(s->mu);
      s->ev_stream.reset();
    }
    worker_ptr->join();
    SimulatorRun run;
    run.scenario_id = scenario_id;
    run.log = s->log;
    run.session = s->result;
    run.pilot_history = s->pilot->history();
    run.error = s->error;
    std::lock_guard lock(impl_->mu);
    impl_->runs.push_back(std::move(run));
  };
  return session;
}

LiveTarget::LiveTarget(LiveTargetConfig config) : config_(std::move(config)) {
  interface_index(config_.interface);
}

TargetSession LiveTarget::open(int, CaptureLog& log) {
  auto raw = std::make_unique<RawEthernetChannel>(config_.interface, slac::kEthertypeHomePlug);
  auto mac = raw->mac();
  unsigned idx = raw->ifindex();
  auto any = parse_endpoint("::", 0);
  auto multicast = parse_endpoint("ff02::1", 15118);
  any.scope_id = idx;
  multicast.scope_id = idx;

  auto pilot = std::make_shared<slac::ControlPilot>(&log);
  // The operator has plugged in; the station drives the pilot to B.
  pilot->apply({slac::CpState::B, 5.0});

  TargetSession session;
  session.slac = std::move(raw);
  session.sdp = std::make_unique<UdpChannel>(any, multicast);
  session.local_mac = mac;
  session.control_pilot = pilot.get();
  session.connect = [idx](const Endpoint& ep, Clock::time_point deadline) -> std::unique_ptr<ByteStream> {
    auto remote = ep;
    if (remote.address[0] == 0xfe && (remote.address[1] & 0xc0) == 0x80) remote.scope_id = idx;
    return TcpStream::connect(remote, deadline);
  };
  session.finish = [pilot] {};
  return session;
}

}  // namespace chargescope::orchestrator
