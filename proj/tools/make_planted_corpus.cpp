// Copyright 2026 The coop-explain Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Writes a planted-keyword corpus as JSONL.

#include <iostream>

#include "CLI11.hpp"
#include "coop/common.hpp"
#include "coop/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Planted-keyword synthetic corpus", "make-planted-corpus"};
  coop::synthetic::PlantedConfig cfg;
  std::string out_path;
  app.add_option("--out,-o", out_path, "Output JSONL path")->required();
  app.add_option("--classes", cfg.num_classes);
  app.add_option("--docs", cfg.num_docs);
  app.add_option("--keywords", cfg.keywords_per_class);
  app.add_option("--background", cfg.background_vocab);
  app.add_option("--tilted", cfg.tilted_per_class);
  app.add_option("--keyword-rate", cfg.keyword_rate);
  app.add_option("--tilt-rate", cfg.tilt_rate);
  app.add_option("--overlap", cfg.overlap);
  app.add_option("--seed", cfg.seed);
  CLI11_PARSE(app, argc, argv);
  try {
    coop::corpus::save_corpus(coop::synthetic::make_planted_corpus(cfg), out_path);
  } catch (const coop::Error& e) {
    std::cerr << e.code() << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
