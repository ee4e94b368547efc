#pragma once
// QA dataset loading (one JSONL schema for both multiple-choice and open QA)
// and the frozen prompt template.

#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kglm/error.hpp"
#include "kglm/text.hpp"

namespace kglm {

struct QaChoice {
    std::string label;
    std::string text;
};

struct QaExample {
    std::string id;
    std::string question;
    std::vector<QaChoice> choices;
    std::string answer;  // choice label for multiple-choice, free text otherwise
};

enum class Schema { MultipleChoice, OpenQa };

inline Schema parse_schema(const std::string& s) {
    if (s == "multiple_choice") return Schema::MultipleChoice;
    if (s == "open_qa") return Schema::OpenQa;
    throw Error("unknown schema '" + s + "' (expected multiple_choice or open_qa)");
}

inline const char* to_string(Schema s) {
    return s == Schema::MultipleChoice ? "multiple_choice" : "open_qa";
}

// Line-delimited JSON: {id, question, choices?, answer}. Multiple-choice
// answers must name an existing choice label.
inline std::vector<QaExample> load_jsonl(const std::string& path, Schema schema) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open dataset: " + path);

    std::vector<QaExample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw ParseError("dataset line is not a JSON object", line_no);

        QaExample ex;
        if (j.contains("id") && j["id"].is_string()) ex.id = j["id"].get<std::string>();
        else if (j.contains("id") && j["id"].is_number_integer())
            ex.id = std::to_string(j["id"].get<long long>());
        else throw ParseError("dataset record needs a string or integer 'id'", line_no);

        if (!j.contains("question") || !j["question"].is_string() || j["question"].get<std::string>().empty())
            throw ParseError("dataset record needs a nonempty 'question'", line_no);
        ex.question = j["question"].get<std::string>();

        if (!j.contains("answer") || !j["answer"].is_string())
            throw ParseError("dataset record needs an 'answer' string", line_no);
        ex.answer = j["answer"].get<std::string>();

        if (j.contains("choices")) {
            if (!j["choices"].is_array()) throw ParseError("'choices' must be an array", line_no);
            for (const auto& c : j["choices"]) {
                if (!c.is_object() || !c.contains("label") || !c["label"].is_string() ||
                    !c.contains("text") || !c["text"].is_string())
                    throw ParseError("each choice needs 'label' and 'text' strings", line_no);
                ex.choices.push_back({c["label"].get<std::string>(), c["text"].get<std::string>()});
            }
        }

        if (schema == Schema::MultipleChoice) {
            if (ex.choices.empty()) throw ParseError("multiple-choice record has no choices", line_no);
            bool found = false;
            for (const auto& c : ex.choices) found = found || c.label == ex.answer;
            if (!found)
                throw ParseError("answer '" + ex.answer + "' names no choice label", line_no);
        }
        out.push_back(std::move(ex));
    }
    return out;
}

// Frozen template: "question: <q> choices: (A) <t> (B) <t> ... answer:",
// run through the rule tokenizer (so labels come out lowercased and bare).
// The choices block is present only when the example carries choices.
inline std::string render_prompt_text(const QaExample& ex) {
    std::string text = "question: " + ex.question;
    if (!ex.choices.empty()) {
        text += " choices:";
        for (const auto& c : ex.choices) text += " (" + c.label + ") " + c.text;
    }
    text += " answer:";
    return text;
}

inline std::vector<std::string> render_prompt(const QaExample& ex) {
    return tokenize(render_prompt_text(ex)).tokens;
}

}  // namespace kglm
