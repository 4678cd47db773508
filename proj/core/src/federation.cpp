#include "fedps/federation.hpp"

#include <json.hpp>

namespace fedps {

std::string CommReport::to_json() const {
    nlohmann::json j;
    j["preprocessor"] = preprocessor;
    j["mode"] = mode;
    j["rounds"] = rounds;
    j["per_client_uplink_bytes"] = per_client_uplink_bytes;
    j["per_client_downlink_bytes"] = per_client_downlink_bytes;
    j["total_bytes"] = total_bytes;
    return j.dump(2);
}

std::vector<std::string> ProtocolContext::gather(
    const std::string& tag, const std::function<std::string(std::size_t)>& produce) {
    std::vector<std::string> payloads;
    payloads.reserve(n_clients_);
    for (std::size_t c = 0; c < n_clients_; ++c) {
        std::string p = produce(c);
        meter_.charge_uplink(c, p.size());
        log_.push_back({static_cast<int>(c), kServerId, meter_.rounds(), tag, p.size()});
        payloads.push_back(std::move(p));
    }
    return payloads;
}

std::string ProtocolContext::collect_from(std::size_t client, const std::string& tag,
                                          const std::string& payload) {
    meter_.charge_uplink(client, payload.size());
    log_.push_back({static_cast<int>(client), kServerId, meter_.rounds(), tag, payload.size()});
    return payload;
}

void ProtocolContext::broadcast(const std::string& tag, const std::string& payload) {
    for (std::size_t c = 0; c < n_clients_; ++c) {
        meter_.charge_downlink(c, payload.size());
        log_.push_back({kServerId, static_cast<int>(c), meter_.rounds(), tag, payload.size()});
    }
}

void ProtocolContext::send_to(std::size_t client, const std::string& tag,
                              const std::string& payload) {
    meter_.charge_downlink(client, payload.size());
    log_.push_back({kServerId, static_cast<int>(client), meter_.rounds(), tag, payload.size()});
}

}  // namespace fedps
