#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ggpp/rag.hpp"

namespace ggpp {

// The four constraint types of the retrieval-manipulation datasets.
inline constexpr const char* kConstraintTypes[] = {
    "own the professions", "get the honors", "written by", "reasons of winnings"};

struct FactRecord {
    std::string entity;          // person name, or book title for "written by"
    std::string constraint_type;
    int birth_year = 0;
    std::string answer;          // the constrained attribute the prompt asks for
    std::string extra;           // award / honor year; empty when unused
};

struct DatasetSpec {
    std::size_t n_records = 1000;
    std::string constraint_type = kConstraintTypes[0];
    std::uint64_t seed = 0;
};

bool is_constraint_type(const std::string& s);

// Deterministic under seed; entities pairwise distinct.
std::vector<FactRecord> generate(const DatasetSpec& spec);

std::string render_prompt(const FactRecord& record);
std::string render_passage(const FactRecord& record);

// (original index, target index): original is the attacked query's record,
// target a different record of the same dataset.
std::pair<std::size_t, std::size_t> pick_attack_pair(const std::vector<FactRecord>& records,
                                                     std::uint64_t seed);

// Renders into the retrieval corpus format; ids are first_id, first_id+1, ...
std::vector<PassageRecord> to_passage_records(const std::vector<FactRecord>& records,
                                              std::uint64_t first_id = 1);

} // namespace ggpp
