#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "tlab/kg.hpp"

namespace tlab {

// Pronounceable two-word name built from syllables. Injective in `index`
// for a fixed (seed, type) over indices below 2^30.
std::string pseudoword_name(std::uint64_t seed, std::string_view semantic_type,
                            std::uint64_t index);

// Rejects strings the sentence templates cannot carry (empty, sentence
// punctuation, possessive markers, control characters).
bool is_valid_entity_name(std::string_view name);

struct NameRequest {
  EntityId id = 0;
  std::string current_name;
  std::string semantic_type;
  std::uint64_t type_index = 0;  // position of the entity within its type
  std::uint32_t attempt = 0;     // > 0 on collision re-draws
  char start_letter = 'A';
  std::vector<std::string> context;  // already-renamed neighbour names
};

class NameProvider {
 public:
  virtual ~NameProvider() = default;
  virtual std::string name(const NameRequest& request) = 0;
  // Providers that use neighbour context get BFS ordering from seed-type
  // entities; the others are order independent.
  virtual bool wants_context() const { return false; }
};

class PseudowordProvider final : public NameProvider {
 public:
  explicit PseudowordProvider(std::uint64_t seed) : seed_(seed) {}
  std::string name(const NameRequest& request) override;

 private:
  std::uint64_t seed_;
};

class IdentityProvider final : public NameProvider {
 public:
  std::string name(const NameRequest& request) override { return request.current_name; }
};

struct RemoteProviderConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string path = "/v1/name";
  std::string api_key;
  std::chrono::milliseconds timeout{10000};
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{200};

  // Fills api_key from TRANSCEND_LAB_LLM_KEY when set.
  static RemoteProviderConfig from_env(std::string host, int port, std::string path);
};

// HTTP client for an external naming service. Request body:
//   {"entity_type": str, "start_letter": str, "context": [str...], "attempt": int}
// Response body: {"name": str}. Failed calls are retried with exponential
// backoff; exhaustion throws RuntimeError.
class RemoteNameProvider final : public NameProvider {
 public:
  explicit RemoteNameProvider(RemoteProviderConfig config) : config_(std::move(config)) {}
  std::string name(const NameRequest& request) override;
  bool wants_context() const override { return true; }

 private:
  RemoteProviderConfig config_;
};

struct RenameOptions {
  std::uint64_t seed = 0;
  std::uint32_t max_redraws = 16;
  std::string seed_type = "country";
};

// Breadth-first order over the undirected graph, starting from entities of
// `seed_type` (ascending id), then from the lowest unvisited id.
std::vector<EntityId> bfs_order(const KnowledgeGraph& graph, std::string_view seed_type);

// Isomorphic copy with names replaced. Collisions are re-drawn up to
// max_redraws times, then ValidationError.
KnowledgeGraph rename_entities(const KnowledgeGraph& graph, NameProvider& provider,
                               const RenameOptions& options = {});

}  // namespace tlab
