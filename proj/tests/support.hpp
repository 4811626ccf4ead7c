#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ctxinfo/corpus.hpp"

namespace testing {

inline std::string fixture(const std::string& name) {
  return std::string(CTXINFO_FIXTURE_DIR) + "/" + name;
}

inline ctxinfo::AnnotatedCorpus vinken() {
  return ctxinfo::load_corpus_file(fixture("vinken.tsv"), false,
                                   ctxinfo::Split::train);
}

inline ctxinfo::AnnotatedCorpus vinken_plain() {
  return ctxinfo::load_corpus_file(fixture("vinken.txt"), true,
                                   ctxinfo::Split::train);
}

inline ctxinfo::AnnotatedCorpus sidecar(const std::string& text,
                                        ctxinfo::Split split =
                                            ctxinfo::Split::train) {
  std::istringstream in(text);
  return ctxinfo::read_sidecar(in, split);
}

inline ctxinfo::AnnotatedCorpus plain(const std::string& text,
                                      ctxinfo::Split split =
                                          ctxinfo::Split::train) {
  std::istringstream in(text);
  return ctxinfo::read_plain_text(in, split);
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::path(CTXINFO_SCRATCH_DIR) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
