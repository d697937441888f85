#pragma once

#include "autofeedback/error.hpp"
#include "autofeedback/static_scanner.hpp"

#include <set>
#include <string>
#include <vector>

namespace autofeedback {

enum class FeedbackPart { Declare, Locate, Exclude, Suggest, Regenerate };

struct StaticFeedback {
    std::string text;
    std::set<FeedbackPart> parts_present;
};

inline constexpr std::string_view kDeclareSentence = "The API request you generated contains an error.";
inline constexpr std::string_view kRegenerateSentence =
    "Please regenerate the API request between <<API>> and <</API>>.";

namespace detail {

inline std::string quoted(const std::string& s) { return "\"" + s + "\""; }

inline std::string locate_part(const DetectionFinding& f) {
    const std::string api = f.request_api.value_or("");
    switch (error_family(f.error_type)) {
        case 1: {
            std::string s = "Error location: the whole request. ";
            if (f.parse_failure == ParseFailure::NoBlock) {
                return s + "No API request of the form APINAME(key1=value1, key2=value2, ...) was found in your output.";
            }
            if (f.parse_failure == ParseFailure::DuplicateKey) {
                return s + "The request repeats a parameter (" + f.parse_detail + ").";
            }
            return s + "The request could not be parsed (" + f.parse_detail + ").";
        }
        case 2:
            return "Error location: the API name. The API name " + quoted(*f.offending_name) +
                   " is incorrect.";
        case 3:
            if (f.missing_parameter) {
                return "Error location: the parameter name. The required parameter " +
                       quoted(*f.offending_name) + " of the API " + quoted(api) + " is missing.";
            }
            return "Error location: the parameter name. The parameter name " + quoted(*f.offending_name) +
                   " is not accepted by the API " + quoted(api) + ".";
        default:
            return "Error location: the parameter value. The value " + *f.offending_name +
                   " given for the parameter " + quoted(f.value_param.value_or("")) + " is incorrect.";
    }
}

inline std::string exclude_part(const DetectionFinding& f) {
    switch (f.error_type) {
        case ErrorType::E2_1: return "The request format is correct.";
        case ErrorType::E2_2: return "The request format is correct. The API name is not a selection error.";
        case ErrorType::E2_3:
            return "The request format is correct. The API name is not a selection error or a formatting error.";
        case ErrorType::E2_OTHER:
            return "The request format is correct. The API name is neither a selection error nor a "
                   "formatting error, and no documented API has a similar name.";
        case ErrorType::E3_1: return "The request format and the API name are correct.";
        case ErrorType::E3_2:
            return "The request format and the API name are correct. The parameter name is not taken "
                   "from another API.";
        case ErrorType::E3_3:
            return "The request format and the API name are correct. The parameter name is not taken "
                   "from another API and is not a formatting error.";
        case ErrorType::E3_OTHER:
            if (f.missing_parameter) return "The request format, the API name and the given parameter names are correct.";
            return "The request format and the API name are correct. The parameter name is not taken "
                   "from another API, is not a formatting error and resembles no documented parameter.";
        case ErrorType::E4_1: return "The request format, the API name and the parameter names are correct.";
        case ErrorType::E4_OTHER:
            return "The request format, the API name and the parameter names are correct, and the value "
                   "types match the documentation.";
        default: return {};
    }
}

inline std::string suggest_part(const DetectionFinding& f) {
    const std::string api = f.request_api.value_or("");
    std::string relevant;
    if (!f.relevant_apis.entries.empty()) {
        relevant = " The API that matches the instruction is " + quoted(f.relevant_apis.entries.front().api_name) + ".";
    }
    switch (f.error_type) {
        case ErrorType::E1:
            return "Cause: the output does not contain a well-formed API request. Write exactly one request "
                   "of the form APINAME(key1=value1, key2=value2, ...) using keyword arguments.";
        case ErrorType::E2_1:
            return "Cause: " + quoted(*f.offending_name) +
                   " is a documented API, but it does not serve the user's instruction." + relevant;
        case ErrorType::E2_2:
            return "Cause: the API name is written in the wrong format. Use the documented name " +
                   quoted(*f.suggested_name) + " instead of " + quoted(*f.offending_name) + ".";
        case ErrorType::E2_3:
            return "Cause: the API " + quoted(*f.offending_name) +
                   " does not exist in the documentation. The documented API " + quoted(*f.suggested_name) +
                   " has a similar meaning; use it instead.";
        case ErrorType::E2_OTHER:
            return "Cause: the API " + quoted(*f.offending_name) +
                   " does not exist in the documentation. Use only documented APIs." + relevant;
        case ErrorType::E3_1:
            return "Cause: the parameter " + quoted(*f.offending_name) +
                   " belongs to a different API. Use only the parameters documented for " + quoted(api) + ".";
        case ErrorType::E3_2:
            return "Cause: the parameter name is written in the wrong format. Use " + quoted(*f.suggested_name) +
                   " instead of " + quoted(*f.offending_name) + ".";
        case ErrorType::E3_3:
            return "Cause: the parameter " + quoted(*f.offending_name) + " does not exist. The documented parameter " +
                   quoted(*f.suggested_name) + " has a similar meaning; use it instead.";
        case ErrorType::E3_OTHER:
            if (f.missing_parameter) {
                return "Cause: the required parameter " + quoted(*f.offending_name) +
                       " was not provided. Add it to the request.";
            }
            return "Cause: the parameter " + quoted(*f.offending_name) + " does not exist for " + quoted(api) +
                   ". Remove it or replace it with a documented parameter.";
        case ErrorType::E4_1:
            return "Cause: the value " + *f.offending_name + " does not match the documented type of " +
                   quoted(f.value_param.value_or("")) + ". Parameter description: " + *f.param_description;
        case ErrorType::E4_OTHER:
            return "Cause: the value " + *f.offending_name +
                   " does not satisfy the user's requirement. Parameter description: " + *f.param_description;
        case ErrorType::NONE: break;
    }
    return {};
}

} // namespace detail

/// Renders the corrective prompt for a finding: declare, locate, exclude
/// (skipped for E1), suggest, regenerate, one per line.
inline StaticFeedback render_feedback(const DetectionFinding& finding) {
    if (finding.error_type == ErrorType::NONE) throw NoError();
    StaticFeedback fb;
    std::vector<std::string> lines;
    auto add = [&](FeedbackPart part, std::string text) {
        if (text.empty()) return;
        lines.push_back(std::move(text));
        fb.parts_present.insert(part);
    };
    add(FeedbackPart::Declare, std::string(kDeclareSentence));
    add(FeedbackPart::Locate, detail::locate_part(finding));
    if (finding.error_type != ErrorType::E1) add(FeedbackPart::Exclude, detail::exclude_part(finding));
    add(FeedbackPart::Suggest, detail::suggest_part(finding));
    add(FeedbackPart::Regenerate, std::string(kRegenerateSentence));
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i) fb.text += '\n';
        fb.text += lines[i];
    }
    return fb;
}

} // namespace autofeedback
