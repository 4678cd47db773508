#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fedps/errors.hpp"
#include "fedps/partition.hpp"

namespace fedps {

constexpr int kServerId = -1;

/// One metered message between a role pair.
struct Envelope {
    int from = kServerId;
    int to = kServerId;
    std::uint64_t round = 0;
    std::string tag;
    std::size_t bytes = 0;
};

/// Byte accounting per client. Only serialized payload bytes are charged;
/// framing is excluded so scaling measurements stay clean.
class CommMeter {
public:
    explicit CommMeter(std::size_t n_clients = 0) { reset(n_clients); }

    void reset(std::size_t n_clients) {
        uplink_.assign(n_clients, 0);
        downlink_.assign(n_clients, 0);
        rounds_ = 0;
    }

    void charge_uplink(std::size_t client, std::size_t bytes) { uplink_[client] += bytes; }
    void charge_downlink(std::size_t client, std::size_t bytes) { downlink_[client] += bytes; }
    void count_round() { ++rounds_; }

    std::uint64_t uplink(std::size_t client) const { return uplink_[client]; }
    std::uint64_t downlink(std::size_t client) const { return downlink_[client]; }
    const std::vector<std::uint64_t>& uplink_all() const { return uplink_; }
    const std::vector<std::uint64_t>& downlink_all() const { return downlink_; }
    std::uint64_t rounds() const { return rounds_; }
    std::uint64_t total_bytes() const {
        std::uint64_t t = 0;
        for (auto b : uplink_) t += b;
        for (auto b : downlink_) t += b;
        return t;
    }

private:
    std::vector<std::uint64_t> uplink_;
    std::vector<std::uint64_t> downlink_;
    std::uint64_t rounds_ = 0;
};

/// Summary of one protocol execution, serializable for the CLI.
struct CommReport {
    std::string preprocessor;
    std::string mode;
    std::uint64_t rounds = 0;
    std::vector<std::uint64_t> per_client_uplink_bytes;
    std::vector<std::uint64_t> per_client_downlink_bytes;
    std::uint64_t total_bytes = 0;

    std::string to_json() const;
};

/// In-process simulated message bus with deterministic delivery order
/// (client id ascending). A "round" is one logical protocol step; a gather
/// and the broadcast that answers it share a round, matching how one-shot
/// preprocessors count as a single round.
class ProtocolContext {
public:
    ProtocolContext(std::size_t n_clients, PartitionMode mode, std::uint64_t seed = 0)
        : n_clients_(n_clients), mode_(mode), seed_(seed), meter_(n_clients) {
        if (n_clients_ < 1) throw ProtocolError("at least one client required");
    }

    std::size_t n_clients() const { return n_clients_; }
    PartitionMode mode() const { return mode_; }
    std::uint64_t seed() const { return seed_; }
    CommMeter& meter() { return meter_; }
    const CommMeter& meter() const { return meter_; }
    const std::vector<Envelope>& log() const { return log_; }

    /// Opens a logical round. Nested steps (e.g. a model fit embedded inside
    /// an imputer sweep) do not open additional rounds while a scope is live.
    class RoundScope {
    public:
        explicit RoundScope(ProtocolContext& ctx) : ctx_(ctx) {
            if (ctx_.round_depth_++ == 0) ctx_.meter_.count_round();
        }
        ~RoundScope() { --ctx_.round_depth_; }
        RoundScope(const RoundScope&) = delete;
        RoundScope& operator=(const RoundScope&) = delete;

    private:
        ProtocolContext& ctx_;
    };

    /// Uplink: every client produces a payload; all are metered and returned
    /// in client-id order.
    std::vector<std::string> gather(const std::string& tag,
                                    const std::function<std::string(std::size_t)>& produce);

    /// Uplink from a single client (e.g. the label holder sending Y).
    std::string collect_from(std::size_t client, const std::string& tag,
                             const std::string& payload);

    /// Downlink: identical payload to every client.
    void broadcast(const std::string& tag, const std::string& payload);

    /// Downlink to one client.
    void send_to(std::size_t client, const std::string& tag, const std::string& payload);

private:
    std::size_t n_clients_;
    PartitionMode mode_;
    std::uint64_t seed_;
    CommMeter meter_;
    std::vector<Envelope> log_;
    int round_depth_ = 0;

    friend class RoundScope;
};

/// Gather per-client summaries of type S, merge on the server, and charge the
/// meter with each client's serialized summary size. Consumes one round.
template <typename S>
S gather_merge(ProtocolContext& ctx, const std::function<S(std::size_t)>& local) {
    ProtocolContext::RoundScope round(ctx);
    std::vector<std::string> payloads =
        ctx.gather("summary", [&](std::size_t c) { return local(c).serialize(); });
    S merged = S::deserialize(payloads[0]);
    for (std::size_t c = 1; c < payloads.size(); ++c) {
        try {
            merged.merge(S::deserialize(payloads[c]));
        } catch (const MergeError& e) {
            throw ProtocolError(std::string("mismatched summary configuration: ") + e.what());
        }
    }
    return merged;
}

}  // namespace fedps
