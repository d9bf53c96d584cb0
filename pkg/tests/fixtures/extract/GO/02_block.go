package main

import (
	"fmt"
	"os"
	"github.com/pkg/errors"
)
