// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "zipcol/array.hpp"
#include "zipcol/arrow_baseline.hpp"
#include "zipcol/codecs.hpp"
#include "zipcol/common.hpp"
#include "zipcol/data_type.hpp"
#include "zipcol/file_reader.hpp"
#include "zipcol/file_writer.hpp"
#include "zipcol/fullzip.hpp"
#include "zipcol/io.hpp"
#include "zipcol/metadata.hpp"
#include "zipcol/miniblock.hpp"
#include "zipcol/packing.hpp"
#include "zipcol/repdef.hpp"
#include "zipcol/value_stream.hpp"
