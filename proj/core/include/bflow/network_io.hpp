#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "bflow/law.hpp"
#include "bflow/network.hpp"

namespace bflow {

struct NetworkDocument {
  FlowNetwork network;
  BistableLaw law;
};

// JSON document {n, nodes:[{id, role[, x, y]}], tubes:[{i, j, conductance}], law:{...}}.
// Field order is fixed, so equal inputs give byte-identical output.
std::string serialize_network(const FlowNetwork& net, const BistableLaw& law = {});

// Throws ErrorCode::schema for malformed documents, ErrorCode::asymmetric when a
// tube is listed in both directions with different conductances, and
// ErrorCode::negative_conductance for C < 0. A missing law block means the
// default law.
NetworkDocument deserialize_network(std::string_view text);

std::string serialize_law(const BistableLaw& law);
BistableLaw deserialize_law(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

NetworkDocument load_network(const std::filesystem::path& path);
void save_network(const std::filesystem::path& path, const FlowNetwork& net,
                  const BistableLaw& law = {});
BistableLaw load_law(const std::filesystem::path& path);

}  // namespace bflow
