package main

import f "fmt"

import (
	m "math"
	_ "net/http/pprof"
)
