#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace stgan::corpus {

/// Lines of a seeded story-grammar corpus: each document is one short scene
/// (a script of sentence templates sharing a cast of slot fillers), documents
/// are separated by empty strings. Exactly `sentences` non-empty lines.
std::vector<std::string> synthetic_corpus(std::size_t sentences, std::uint64_t seed);

/// Every word the grammar can emit, punctuation included.
std::set<std::string> synthetic_lexicon();

}  // namespace stgan::corpus
