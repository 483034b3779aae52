#pragma once

#include "ghosty/api/cli.hpp"
#include "ghosty/api/generator.hpp"
#include "ghosty/api/http.hpp"
#include "ghosty/api/report.hpp"
#include "ghosty/api/service.hpp"
#include "ghosty/batch.hpp"
#include "ghosty/collider.hpp"
#include "ghosty/common.hpp"
#include "ghosty/config.hpp"
#include "ghosty/error.hpp"
#include "ghosty/integration.hpp"
#include "ghosty/ledger.hpp"
#include "ghosty/precog.hpp"
#include "ghosty/serialize.hpp"
