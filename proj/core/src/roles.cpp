#include "agriflow/roles.hpp"

#include <cctype>
#include <string>

namespace agriflow {

const char* to_string(Role role) noexcept {
  switch (role) {
    case Role::kFarmManager: return "FarmManager";
    case Role::kAgronomist: return "Agronomist";
    case Role::kFieldWorker: return "FieldWorker";
    case Role::kDroneOperator: return "DroneOperator";
    case Role::kQcDeviceUser: return "QCDeviceUser";
    case Role::kExternalProvider: return "ExternalProvider";
  }
  return "?";
}

std::optional<Role> parse_role(std::string_view name) noexcept {
  std::string key;
  for (char c : name) {
    if (c != '_' && c != '-' && c != ' ') key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  if (key == "farmmanager") return Role::kFarmManager;
  if (key == "agronomist" || key == "viticulturist") return Role::kAgronomist;
  if (key == "fieldworker" || key == "fieldworkers") return Role::kFieldWorker;
  if (key == "droneoperator") return Role::kDroneOperator;
  if (key == "qcdeviceuser") return Role::kQcDeviceUser;
  if (key == "externalprovider") return Role::kExternalProvider;
  return std::nullopt;
}

}  // namespace agriflow
