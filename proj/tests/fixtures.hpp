// Shared response-text fixtures for extraction/scoring tests. Three styles of
// solution to the same 10-operation chain (true answer 11440): a clean direct
// solve, a verbose derailed solve committing to a wrong final value, and a
// self-checking solve that recovers and boxes the answer twice.
#pragma once

namespace fixtures {

inline constexpr const char* kChainQuestion =
    "(14*21*38+32+23+31+3)-11+59+71+60";

// Clean direct solve; one boxed answer.
inline constexpr const char* kCleanSolve = R"(To evaluate the expression, handle the product first and then fold in the remaining terms from left to right.

14 * 21 = 294
294 * 38 = 11172

Adding the grouped constants:
11172 + 32 = 11204
11204 + 23 = 11227
11227 + 31 = 11258
11258 + 3 = 11261

Remaining terms in order:
11261 - 11 = 11250
11250 + 59 = 11309
11309 + 71 = 11380
11380 + 60 = 11440

Thus, the final answer is: \boxed{11440}
)";

// Verbose derailed solve: slips while adding 59, "verifies" the slip into
// place, revisits candidate totals (11299, 11340), and commits to a wrong
// final value. One boxed answer, wrong.
inline constexpr const char* kDerailedSolve = R"(Okay, there is a big product up front, so start with that piece.

14 * 21 = 294, and 294 * 38 = 11172. Now fold in the small constants one at a time: 11172 + 32 = 11204, then + 23 = 11227, then + 31 = 11258, then + 3 = 11261. So the group in front totals 11261.

Next comes the minus: 11261 - 11 = 11250. Now add 59. 11250 + 50 = 11290, plus 9 more is 11299. Hold on, something feels off there, but 11290 + 9 = 11299, so keep 11299. Then 11299 + 71: 11299 + 70 = 11369, plus 1 = 11370. Then 11370 + 60. Splitting 60 as 50 + 10 gives 11320 + 10 = 11330. No wait, that splits wrong; counting up by tens from 11370 six times lands on 11430, so 11370 + 60 = 11430.

Try the tail another way to be sure: 59 + 71 + 60 = 190, and 11250 + 190: 11250 + 100 = 11350, plus 90 looks like 11340. That disagrees with the running total, so redo it slowly. 11250 + 59 = 11299 as before. 11299 + 71 = 11370 as before. 11370 + 60 = 11430 as before. The grouped route must have slipped; the step-by-step route stands.

So the final answer is \boxed{11430}.
)";

// Self-checking solve: verifies the product two ways, re-adds the tail,
// writes the total with a thousands separator in prose, and boxes the answer
// twice (mid-solution and in the closing line).
inline constexpr const char* kRecoveredSolve = R"(Start inside the parentheses. 14 * 21 = 294; then 294 * 38: compute 294 * 40 = 11760 and subtract 294 * 2 = 588, giving 11172. Cross-checking by parts, 294 * 30 = 8820 and 294 * 8 = 2352, and 8820 + 2352 = 11172, which agrees.

The small constants sum to 32 + 23 + 31 + 3 = 89, so the group totals 11172 + 89 = 11261.

Then 11261 - 11 = 11250. The remaining additions are 59 + 71 + 60 = 190, and 11250 + 190 = 11440. Let me go over the steps once more: product 11172, group 11261, minus eleven 11250, tail 190, total 11,440. Everything checks, so the final answer is \boxed{11440}.

Re-adding the tail a different way: 59 + 71 = 130, 130 + 60 = 190, and 11250 + 190 = 11,440 again.

**Final Answer**
\boxed{11440}
)";

// Reflection-detector fixture: one positive snippet per pool phrase, and
// fifteen negatives (including near-misses like bare "check" or
// "assessment") containing no pool phrase as a substring.
struct ReflectionSnippet {
  const char* text;
  const char* phrase;  // expected match; nullptr for negatives
};

inline constexpr ReflectionSnippet kReflectionPositives[15] = {
    {"Wait, I want to recheck the subtraction before moving on.", "recheck"},
    {"Actually, let me rethink how the product was grouped.", "rethink"},
    {"Time to reassess the running total so far.", "reassess"},
    {"I should reevaluate the division step.", "reevaluate"},
    {"Let me re-evaluate the sum once more.", "re-evaluate"},
    {"A quick reevaluation of step four seems wise.", "reevaluation"},
    {"I want to re-examine the second multiplication.", "re-examine"},
    {"Better reexamine the order of operations here.", "reexamine"},
    {"On second thought, I will reconsider the grouping.", "reconsider"},
    {"Let me reanalyze the tail additions.", "reanalyze"},
    {"Let me double-check the sum.", "double-check"},
    {"I will check again whether 294 times 38 is 11172.", "check again"},
    {"Hmm, think again about whether the remainder vanished.", "think again"},
    {"I will verify again carefully", "verify again"},
    {"Let me go over the steps from the top.", "go over the steps"},
};

inline constexpr ReflectionSnippet kReflectionNegatives[15] = {
    {"The answer is 4.", nullptr},
    {"Adding the numbers gives 100.", nullptr},
    {"First compute the product, then the sum.", nullptr},
    {"The total comes to 11440.", nullptr},
    {"Checking the clock, it is time to stop.", nullptr},
    {"A careful verification of each step.", nullptr},
    {"Evaluate the expression from left to right.", nullptr},
    {"The quotient is exact, so continue.", nullptr},
    {"Multiplying 14 by 21 yields 294.", nullptr},
    {"Subtract eleven to get 11250.", nullptr},
    {"This problem has ten operations.", nullptr},
    {"State the result in a box at the end.", nullptr},
    {"No further corrections are needed.", nullptr},
    {"The assessment stands.", nullptr},
    {"Consider the parentheses first.", nullptr},
};

}  // namespace fixtures
