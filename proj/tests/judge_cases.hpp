#pragma once

#include <array>
#include <string_view>

#include "tablelogic/evaluator.hpp"

namespace testutil {

struct JudgeCase {
  std::string_view raw;
  tablelogic::JudgeToken expected;
};

using tablelogic::JudgeToken;

// Judge replies seen in practice, plus edge cases around word boundaries.
inline constexpr std::array<JudgeCase, 30> kJudgeCases = {{
    {"Yes", JudgeToken::yes},
    {"No", JudgeToken::no},
    {"yes.", JudgeToken::yes},
    {"NO!", JudgeToken::no},
    {"YES", JudgeToken::yes},
    {"Yes, the predicted answer is correct.", JudgeToken::yes},
    {"No, the predicted answer does not match.", JudgeToken::no},
    {"**Yes**", JudgeToken::yes},
    {"Answer: No", JudgeToken::no},
    {"\n\nyes\n", JudgeToken::yes},
    {"Yes\nThe gold answer is 12 and the prediction is 12.", JudgeToken::yes},
    {"'No'", JudgeToken::no},
    {"\"Yes\"", JudgeToken::yes},
    {"(no)", JudgeToken::no},
    {"Judgement: yes", JudgeToken::yes},
    {"yes yes", JudgeToken::yes},
    {"No. No.", JudgeToken::no},
    {"Nope", JudgeToken::ambiguous},
    {"Yesterday it was correct", JudgeToken::ambiguous},
    {"Not sure", JudgeToken::ambiguous},
    {"Nobody knows", JudgeToken::ambiguous},
    {"Yes and no", JudgeToken::ambiguous},
    {"", JudgeToken::ambiguous},
    {"Y", JudgeToken::ambiguous},
    {"Noted", JudgeToken::ambiguous},
    {"Correct", JudgeToken::ambiguous},
    {"Yes/No", JudgeToken::ambiguous},
    {"I cannot say", JudgeToken::ambiguous},
    {"The answer is YES.", JudgeToken::yes},
    {"no\t", JudgeToken::no},
}};

}  // namespace testutil
