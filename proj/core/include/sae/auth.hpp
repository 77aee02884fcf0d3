#pragma once

// Local token authentication. Only SHA-256 digests of tokens are stored; the
// plaintext is shown once when the user is created or the token is rotated.

#include "sae/model.hpp"
#include "sae/store.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sae {

enum class Role { student, teacher };

std::string_view to_string(Role r);
std::optional<Role> parse_role(std::string_view s);

struct User {
    std::string user_id;
    Role role = Role::student;
    std::string token_hash;
    std::optional<Timestamp> expires_at;
};

struct Session {
    std::string user_id;
    Role role = Role::student;

    bool is_teacher() const { return role == Role::teacher; }
};

class UserDirectory {
public:
    explicit UserDirectory(Store& store) : store_(store) {}

    /// Creates or replaces the user and returns a fresh plaintext token.
    std::string add(const std::string& user_id, Role role, std::optional<Timestamp> expires_at = std::nullopt);

    /// Registers a caller-chosen token (used for seeded users in tests and configs).
    void add_with_token(const std::string& user_id, Role role, const std::string& token,
                        std::optional<Timestamp> expires_at = std::nullopt);

    std::optional<User> get(const std::string& user_id) const;
    std::vector<User> list() const;
    bool remove(const std::string& user_id);

    /// nullopt for unknown or expired tokens.
    std::optional<Session> authenticate(const std::string& token, Timestamp now = now_utc()) const;

private:
    Store& store_;
};

}  // namespace sae
