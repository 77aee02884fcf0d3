#include "sae/command.hpp"

namespace sae {

std::vector<std::string> split_command(std::string_view line) {
    std::vector<std::string> words;
    std::string cur;
    bool in_word = false;
    char quote = 0;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quote == '\'') {
            if (c == '\'') quote = 0;
            else cur += c;
        } else if (c == '\\' && i + 1 < line.size()) {
            cur += line[++i];
            in_word = true;
        } else if (quote == '"') {
            if (c == '"') quote = 0;
            else cur += c;
        } else if (c == '\'' || c == '"') {
            quote = c;
            in_word = true;
        } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            if (in_word) words.push_back(std::move(cur));
            cur.clear();
            in_word = false;
        } else {
            cur += c;
            in_word = true;
        }
    }
    if (in_word) words.push_back(std::move(cur));
    return words;
}

std::vector<std::string> instantiate_command(std::string_view templ,
                                             const std::map<std::string, std::string>& slot_files,
                                             const std::vector<std::string>& extra_args) {
    auto words = split_command(templ);
    for (auto& w : words) {
        std::string out;
        std::size_t pos = 0;
        while (pos < w.size()) {
            auto open = w.find('{', pos);
            if (open == std::string::npos) break;
            auto close = w.find('}', open + 1);
            if (close == std::string::npos) break;
            out.append(w, pos, open - pos);
            auto name = w.substr(open + 1, close - open - 1);
            if (auto it = slot_files.find(name); it != slot_files.end()) out += it->second;
            else out.append(w, open, close - open + 1);
            pos = close + 1;
        }
        out.append(w, pos, std::string::npos);
        w = std::move(out);
    }
    words.insert(words.end(), extra_args.begin(), extra_args.end());
    return words;
}

}  // namespace sae
