#pragma once

// Hand-built corpus files with their expected pairs.

#include <string>
#include <vector>

#include "cwgan/text/corpus.hpp"

namespace cwgan::testing {

inline const char* cornell_lines() {
  return "L1 +++$+++ u0 +++$+++ m0 +++$+++ BIANCA +++$+++ Can we make this quick?\n"
         "L2 +++$+++ u2 +++$+++ m0 +++$+++ CAMERON +++$+++ Well, I thought we'd start with pronunciation.\n"
         "L3 +++$+++ u0 +++$+++ m0 +++$+++ BIANCA +++$+++ Not the hacking and gagging.\n"
         "L10 +++$+++ u1 +++$+++ m0 +++$+++ X +++$+++ \n"
         "L11 +++$+++ u2 +++$+++ m0 +++$+++ Y +++$+++ Who?\n"
         "L12 +++$+++ u1 +++$+++ m0 +++$+++ X +++$+++ Nobody.\r\n"
         "broken row without delimiters\n"
         "L20 +++$+++ u5 +++$+++ m1 +++$+++ Z +++$+++ First.\n"
         "L22 +++$+++ u6 +++$+++ m1 +++$+++ W +++$+++ Third.\n"
         "L23 +++$+++ u5 +++$+++ m1 +++$+++ Z +++$+++ Fourth.\n";
}

inline const char* cornell_conversations() {
  return "u0 +++$+++ u2 +++$+++ m0 +++$+++ ['L1', 'L2', 'L3']\n"
         "u1 +++$+++ u2 +++$+++ m0 +++$+++ ['L10', 'L11', 'L12']\n"
         "u5 +++$+++ u6 +++$+++ m1 +++$+++ ['L20', 'L21', 'L22', 'L23']\n"
         "u5 +++$+++ u6 +++$+++ m1 +++$+++ not a list\n";
}

// L10 is empty, so (L10, L11) is dropped; L21 is missing, so the chain breaks.
inline std::vector<text::DialoguePair> cornell_expected() {
  return {
      {"Can we make this quick?", "Well, I thought we'd start with pronunciation."},
      {"Well, I thought we'd start with pronunciation.", "Not the hacking and gagging."},
      {"Who?", "Nobody."},
      {"Third.", "Fourth."},
  };
}

inline const char* chitchat_json() {
  return R"({
  "c1": {"messages": [
    [{"text": "hey there", "sender": "a"}, {"text": "you around?", "sender": "a"}],
    [{"text": "yes", "sender": "b"}],
    [{"text": "", "sender": "a"}, {"text": "cool", "sender": "a"}]
  ]},
  "c2": {"messages": [{"text": "solo", "sender": "x"}]},
  "c3": {"messages": []},
  "c4": [{"text": "one", "sender": "p"}, {"text": "two", "sender": "q"}]
})";
}

inline std::vector<text::DialoguePair> chitchat_expected() {
  return {
      {"hey there you around?", "yes"},
      {"yes", "cool"},
      {"one", "two"},
  };
}

}  // namespace cwgan::testing
