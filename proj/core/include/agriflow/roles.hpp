#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace agriflow {

// Stakeholder roles. The viticulturist is the agronomist of a vineyard, so both
// names resolve to kAgronomist.
enum class Role {
  kFarmManager,
  kAgronomist,
  kFieldWorker,
  kDroneOperator,
  kQcDeviceUser,
  kExternalProvider,
};

inline constexpr std::array<Role, 6> kAllRoles = {Role::kFarmManager,   Role::kAgronomist,
                                                  Role::kFieldWorker,   Role::kDroneOperator,
                                                  Role::kQcDeviceUser,  Role::kExternalProvider};

const char* to_string(Role role) noexcept;
std::optional<Role> parse_role(std::string_view name) noexcept;

}  // namespace agriflow
