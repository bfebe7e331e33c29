#include "forge/core.hpp"

#include <algorithm>
#include <cmath>

namespace forge {

const char* to_string(NodeStatus s) {
    switch (s) {
        case NodeStatus::extracted: return "extracted";
        case NodeStatus::synthesized: return "synthesized";
        case NodeStatus::conjecture: return "conjecture";
        case NodeStatus::verified: return "verified";
        case NodeStatus::rejected: return "rejected";
    }
    return "unknown";
}

NodeStatus node_status_from_string(const std::string& s) {
    if (s == "extracted") return NodeStatus::extracted;
    if (s == "synthesized") return NodeStatus::synthesized;
    if (s == "conjecture") return NodeStatus::conjecture;
    if (s == "verified") return NodeStatus::verified;
    if (s == "rejected") return NodeStatus::rejected;
    throw ValidationError("unknown node status: " + s);
}

bool status_transition_allowed(NodeStatus from, NodeStatus to) {
    if (from == to) return true;
    switch (from) {
        case NodeStatus::extracted:
        case NodeStatus::synthesized:
            return to == NodeStatus::conjecture || to == NodeStatus::verified ||
                   to == NodeStatus::rejected;
        case NodeStatus::conjecture:
            return to == NodeStatus::verified || to == NodeStatus::rejected;
        case NodeStatus::verified:
        case NodeStatus::rejected:
            return false;
    }
    return false;
}

std::string embedding_text(const std::string& name, const std::string& summary,
                           const std::vector<std::string>& keywords) {
    std::string text = name;
    if (!summary.empty()) {
        if (!text.empty()) text.push_back(' ');
        text += summary;
    }
    for (const auto& kw : keywords) {
        if (!text.empty()) text.push_back(' ');
        text += kw;
    }
    return text;
}

const char* to_string(CandidateStatus s) {
    switch (s) {
        case CandidateStatus::pending: return "pending";
        case CandidateStatus::kept: return "kept";
        case CandidateStatus::rejected: return "rejected";
        case CandidateStatus::conjecture: return "conjecture";
        case CandidateStatus::verified: return "verified";
    }
    return "unknown";
}

std::vector<NodeId> RetrievalContext::node_ids() const {
    std::vector<NodeId> ids;
    ids.reserve(leaves.size() + ancestors.size());
    for (const auto& [id, sim] : leaves) ids.push_back(id);
    for (const auto& hit : ancestors) ids.push_back(hit.ancestor);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

bool RetrievalContext::contains(NodeId id) const {
    for (const auto& [leaf, sim] : leaves)
        if (leaf == id) return true;
    for (const auto& hit : ancestors)
        if (hit.ancestor == id) return true;
    return false;
}

double rating_to_weight(int rating) {
    if (rating < 1 || rating > 5)
        throw ValidationError("rating " + std::to_string(rating) + " outside [1,5]");
    return static_cast<double>(rating - 1) / 4.0;
}

int weight_to_rating(double weight) {
    if (!(weight >= 0.0 && weight <= 1.0))
        throw ValidationError("weight " + std::to_string(weight) + " outside [0,1]");
    int r = static_cast<int>(std::lround(4.0 * weight)) + 1;
    return std::clamp(r, 1, 5);
}

std::vector<std::pair<NodeId, double>> normalize_shares(
    const std::vector<std::pair<NodeId, double>>& weights, double epsilon) {
    if (!(epsilon > 0.0))
        throw ValidationError("epsilon must be positive");
    double sum = 0.0;
    for (const auto& [id, w] : weights) {
        if (w < 0.0)
            throw ValidationError("negative weight for node " + std::to_string(id));
        sum += w;
    }
    std::vector<std::pair<NodeId, double>> shares;
    shares.reserve(weights.size());
    double denom = sum + epsilon;
    for (const auto& [id, w] : weights) shares.emplace_back(id, w / denom);
    return shares;
}

} // namespace forge
