#pragma once

// Reference prompt wording, whitespace-normalized.
namespace testutil::golden {

inline constexpr const char* kReading =
    "Table data is structured in a dictionary with keys 'header', 'rows', and 'name'. The "
    "'header' contains column names, 'rows' includes sublists for each row matching the header, "
    "and 'name' provides the table's identifier.";
inline constexpr const char* kColumns =
    "Table: {table} Reading instruction: {format} Based on the reading instruction of this "
    "table, identify critical columns highly relevant to this question: {question}.";
inline constexpr const char* kRows =
    "Table: {table} Reading instruction: {format} Critical columns: {column} Based on the "
    "reading instruction and critical columns of this table, identify critical rows highly "
    "relevant to this question: {question}.";
inline constexpr const char* kAggregation =
    "Table: {table} Reading instruction: {format} Critical columns: {column} Critical rows: {row} "
    "Based on the reading instruction and key values in critical columns and rows of this table, "
    "identify any aggregation, calculation, and comparison required by this question: {question}";
inline constexpr const char* kAnswer =
    "Table: {table} Reading instruction: {format} Given this table and read instruction, answer "
    "this question: {question}. You do not need to explain the answer. Additional information "
    "that may help is given below. Critical columns: {column} Critical rows: {row} Aggregation, "
    "calculation, and comparison: {aggregation}";
inline constexpr const char* kJudge =
    "You are now an intelligent assessment assistant. Based on the question and the golden "
    "answer, judge whether the predicted answer correctly answers the question and give only a "
    "Yes or No. Question: {question} Gold Answer: {gold} Predicted Answer: {prediction}";

}  // namespace testutil::golden
