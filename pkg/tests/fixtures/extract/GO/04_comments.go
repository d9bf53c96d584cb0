package main

// import "fake"

import (
	"strings"
	// "commented/out"
)
