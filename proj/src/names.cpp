#include "tlab/names.hpp"

#include <array>
#include <cstdlib>
#include <deque>
#include <thread>
#include <unordered_set>

#include "httplib.h"
#include "json.hpp"
#include "tlab/error.hpp"
#include "tlab/rng.hpp"

namespace tlab {
namespace {

// Onsets never start with another onset followed by a vowel, and every
// syllable is onset+vowel, so concatenations parse uniquely.
constexpr std::array<std::string_view, 16> kOnsets = {"b", "d", "f", "g", "k", "l", "m", "n",
                                                      "p", "r", "s", "t", "v", "z", "th", "gl"};
constexpr std::array<char, 4> kVowels = {'a', 'e', 'i', 'o'};
constexpr std::array<std::string_view, 8> kCodas = {"r", "n", "s", "th", "l", "x", "dor", "ris"};

std::string syllable(std::uint32_t digit) {
  std::string s(kOnsets[digit >> 2]);
  s.push_back(kVowels[digit & 3]);
  return s;
}

// 4-round Feistel network over 30 bits (two 15-bit halves).
std::uint32_t permute30(std::uint32_t x, std::uint64_t key) {
  std::uint32_t left = x >> 15;
  std::uint32_t right = x & 0x7fff;
  for (std::uint64_t round = 0; round < 4; ++round) {
    const auto f = static_cast<std::uint32_t>(derive_seed(key, round, right) & 0x7fff);
    const std::uint32_t next = left ^ f;
    left = right;
    right = next;
  }
  return (left << 15) | right;
}

void capitalize(std::string& s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
}

}  // namespace

std::string pseudoword_name(std::uint64_t seed, std::string_view semantic_type,
                            std::uint64_t index) {
  const std::uint64_t key = derive_seed(seed, hash_string(semantic_type));
  const std::uint32_t v = permute30(static_cast<std::uint32_t>(index & 0x3fffffff), key);
  std::string first;
  for (int i = 0; i < 3; ++i) first += syllable((v >> (24 - 6 * i)) & 63);
  first += kCodas[key & 7];
  std::string second;
  for (int i = 0; i < 2; ++i) second += syllable((v >> (6 - 6 * i)) & 63);
  second += kCodas[(key >> 3) & 7];
  capitalize(first);
  capitalize(second);
  return first + " " + second;
}

bool is_valid_entity_name(std::string_view name) {
  if (name.empty() || name.front() == ' ' || name.back() == ' ') return false;
  if (name.find("'s") != std::string_view::npos) return false;
  for (char c : name) {
    if (c == '.' || c == '?' || c == ';' || c == '\n' || c == '\r' || c == '\t') return false;
  }
  return true;
}

std::string PseudowordProvider::name(const NameRequest& request) {
  const std::uint64_t seed =
      request.attempt == 0 ? seed_ : derive_seed(seed_, "redraw", request.attempt);
  return pseudoword_name(seed, request.semantic_type, request.type_index);
}

RemoteProviderConfig RemoteProviderConfig::from_env(std::string host, int port,
                                                    std::string path) {
  RemoteProviderConfig c;
  c.host = std::move(host);
  c.port = port;
  c.path = std::move(path);
  if (const char* key = std::getenv("TRANSCEND_LAB_LLM_KEY")) c.api_key = key;
  return c;
}

std::string RemoteNameProvider::name(const NameRequest& request) {
  nlohmann::ordered_json body;
  body["entity_type"] = request.semantic_type;
  body["start_letter"] = std::string(1, request.start_letter);
  body["context"] = request.context;
  body["attempt"] = request.attempt;
  const std::string payload = body.dump();

  httplib::Client client(config_.host, config_.port);
  const auto secs = config_.timeout.count() / 1000;
  const auto usecs = (config_.timeout.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  std::string last_error = "no attempts made";
  auto backoff = config_.initial_backoff;
  for (int attempt = 0; attempt < config_.attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    auto res = client.Post(config_.path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP status " + std::to_string(res->status);
      continue;
    }
    auto reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.is_object() || !reply.contains("name") ||
        !reply["name"].is_string()) {
      last_error = "malformed reply body";
      continue;
    }
    auto name = reply["name"].get<std::string>();
    if (!is_valid_entity_name(name)) {
      last_error = "unusable name '" + name + "'";
      continue;
    }
    return name;
  }
  throw RuntimeError("remote name provider failed after " + std::to_string(config_.attempts) +
                     " attempts for entity " + std::to_string(request.id) + ": " + last_error);
}

std::vector<EntityId> bfs_order(const KnowledgeGraph& graph, std::string_view seed_type) {
  const std::size_t n = graph.num_entities();
  std::vector<char> seen(n, 0);
  std::vector<EntityId> order;
  order.reserve(n);
  std::deque<EntityId> queue;
  auto visit_from = [&](EntityId start) {
    if (seen[start]) return;
    seen[start] = 1;
    queue.push_back(start);
    while (!queue.empty()) {
      const EntityId v = queue.front();
      queue.pop_front();
      order.push_back(v);
      for (std::size_t i : graph.out_facts(v)) {
        const EntityId u = graph.facts()[i].tail;
        if (!seen[u]) {
          seen[u] = 1;
          queue.push_back(u);
        }
      }
      for (std::size_t i : graph.in_facts(v)) {
        const EntityId u = graph.facts()[i].head;
        if (!seen[u]) {
          seen[u] = 1;
          queue.push_back(u);
        }
      }
    }
  };
  for (EntityId v : graph.entities_of_type(seed_type)) visit_from(v);
  for (EntityId v = 0; v < n; ++v) visit_from(v);
  return order;
}

KnowledgeGraph rename_entities(const KnowledgeGraph& graph, NameProvider& provider,
                               const RenameOptions& options) {
  const std::size_t n = graph.num_entities();
  std::vector<std::uint64_t> type_index(n, 0);
  for (const auto& [type, ids] : graph.type_index()) {
    for (std::size_t i = 0; i < ids.size(); ++i) type_index[ids[i]] = i;
  }

  std::vector<EntityId> order;
  if (provider.wants_context()) {
    order = bfs_order(graph, options.seed_type);
  } else {
    order.resize(n);
    for (EntityId v = 0; v < n; ++v) order[v] = v;
  }

  std::vector<std::string> names(n);
  std::vector<char> renamed(n, 0);
  std::unordered_set<std::string> used;
  Rng rng(derive_seed(options.seed, "rename"));
  for (EntityId v : order) {
    NameRequest req;
    req.id = v;
    req.current_name = graph.entity(v).name;
    req.semantic_type = graph.entity(v).type;
    req.type_index = type_index[v];
    req.start_letter = static_cast<char>('A' + rng.index(26));
    if (provider.wants_context()) {
      for (std::size_t i : graph.out_facts(v)) {
        if (EntityId u = graph.facts()[i].tail; renamed[u]) req.context.push_back(names[u]);
      }
      for (std::size_t i : graph.in_facts(v)) {
        if (EntityId u = graph.facts()[i].head; renamed[u]) req.context.push_back(names[u]);
      }
    }
    bool assigned = false;
    for (std::uint32_t attempt = 0; attempt <= options.max_redraws; ++attempt) {
      req.attempt = attempt;
      std::string candidate = provider.name(req);
      if (!is_valid_entity_name(candidate)) continue;
      if (used.insert(candidate).second) {
        names[v] = std::move(candidate);
        assigned = true;
        break;
      }
    }
    if (!assigned) {
      throw ValidationError("could not find a unique name for entity " + std::to_string(v) +
                            " after " + std::to_string(options.max_redraws) + " re-draws");
    }
    renamed[v] = 1;
  }

  std::vector<Entity> entities = graph.entities();
  for (EntityId v = 0; v < n; ++v) entities[v].name = std::move(names[v]);
  return KnowledgeGraph::build(std::move(entities), graph.relations(), graph.facts());
}

}  // namespace tlab
