#pragma once

// Everything except the HTTP gateways, which live in http_gateways.hpp so
// that only code talking to real servers pulls in cpp-httplib.

#include "autofeedback/benchmark.hpp"
#include "autofeedback/doc_model.hpp"
#include "autofeedback/dynamic_analyzer.hpp"
#include "autofeedback/error.hpp"
#include "autofeedback/feedback.hpp"
#include "autofeedback/gateways.hpp"
#include "autofeedback/judge.hpp"
#include "autofeedback/metrics.hpp"
#include "autofeedback/orchestrator.hpp"
#include "autofeedback/request_codec.hpp"
#include "autofeedback/retrieval.hpp"
#include "autofeedback/session_log.hpp"
#include "autofeedback/similarity.hpp"
#include "autofeedback/static_scanner.hpp"
