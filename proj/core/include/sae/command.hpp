#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace sae {

/// Splits a command line into argv words. Single and double quotes group
/// words; a backslash escapes the next character outside single quotes.
/// No variable expansion, globbing or redirection.
std::vector<std::string> split_command(std::string_view line);

/// Expands `{slot}` placeholders with the slot's file name and appends
/// `extra_args`. Unknown placeholders are left verbatim.
std::vector<std::string> instantiate_command(std::string_view templ,
                                             const std::map<std::string, std::string>& slot_files,
                                             const std::vector<std::string>& extra_args = {});

}  // namespace sae
